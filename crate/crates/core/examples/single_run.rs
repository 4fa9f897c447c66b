//! One scenario instance end to end: build geometry and channels, run the
//! joint optimization, print the outcome and the objective trace.

use bdris::channel::{sample_environment, EnvironmentParams};
use bdris::fp::{optimize, Mobility, OptimizerConfig};
use bdris::geometry::{Region, SystemGeometry};
use bdris::ris::RisArchitecture;

fn main() -> bdris::Result<()> {
    let m = 16;
    let arch = RisArchitecture::grouped(m, 4)?;
    let wavelength = 0.01;
    let region = Region::centered(1.2 * (m as f64 - 1.0) * wavelength / 2.0, 4.0 * wavelength);
    let mut geometry = SystemGeometry::linear(&arch, 4, 2, wavelength, region, 50.0, 2.0)?;

    let params = EnvironmentParams {
        num_tx_paths: 6,
        num_rx_paths: 6,
        num_users: 2,
        rician_kappa: 1.0,
        pathloss_gamma0: 1e-3, // -30 dB at 1 m
        pathloss_alpha: 2.2,
        bs_ris_distance: 50.0,
        ris_ue_radius: 2.0,
        min_ue_distance: 0.5,
    };
    let (env, ue_positions) = sample_environment(&params, 42)?;
    geometry.ue_positions = ue_positions;

    let noise_power = 1e-11; // -80 dBm
    for mobility in [Mobility::Fa, Mobility::Ma] {
        let config = OptimizerConfig {
            mobility,
            ..OptimizerConfig::default()
        };
        let result = optimize(&env, &geometry, &arch, noise_power, &config)?;
        println!(
            "{mobility}: {:.3} bits/s/Hz after {} outer iterations (converged: {}, flags: {})",
            result.sum_rate(),
            result.outer_iterations,
            result.converged,
            result.flags.tokens()
        );
        let trace: Vec<String> = result
            .trace
            .iter()
            .step_by(result.trace.len().div_ceil(8).max(1))
            .map(|r| format!("{r:.2}"))
            .collect();
        println!("  trace: {}", trace.join(" -> "));
        if mobility == Mobility::Ma {
            for (g, c) in result.group_refs.iter().enumerate() {
                println!("  group {g}: ({:+.4}, {:+.4}) m", c.x, c.y);
            }
        }
    }
    Ok(())
}
