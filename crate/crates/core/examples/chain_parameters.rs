//! Local frequencies, hoppings and normal modes of a transverse ion chain,
//! then the rotating-frame parameters for a 4-ion dynamics configuration.
//!
//!     cargo run --example chain_parameters

use rabi_hubbard::chain::{collective_modes, interaction_picture, motional_model, ChainGeometry};
use rabi_hubbard::params::{find_set, Study};
use rabi_hubbard::units::{khz, mhz, micrometers, to_khz, to_mhz};

fn main() -> rabi_hubbard::Result<()> {
    let geom = ChainGeometry::uniform(6, micrometers(5.4), mhz(2.5))?;
    let motion = motional_model(&geom)?;
    println!("uniform 6-ion chain, d = 5.4 um, trap 2.5 MHz");
    for i in 0..6 {
        println!(
            "  ion {i}: local {:.5} MHz  corrected {:.5} MHz",
            to_mhz(motion.local_freqs[i]),
            to_mhz(motion.corrected_freqs[i])
        );
    }
    let t1 = motion.corrected_hoppings[(0, 1)];
    println!("  nearest-neighbour hopping {:.2} kHz", to_khz(t1));
    for r in 2..=4 {
        let t = motion.corrected_hoppings[(0, r)];
        println!("  t(0,{r}) * {r}^3 / t(0,1) = {:.4}", t * (r * r * r) as f64 / t1);
    }
    let modes = collective_modes(&motion)?;
    let listed: Vec<String> = modes.freqs.iter().map(|w| format!("{:.4}", to_mhz(*w))).collect();
    println!("  modes (MHz): {}", listed.join(" "));

    let set = find_set(Study::Dynamics, 4)?;
    let m = interaction_picture(
        &motional_model(&set.geometry()?)?,
        khz(set.delta_b_khz),
        khz(set.delta_r_khz),
    );
    println!("\n4-ion dynamics set");
    println!("  spin frequency {:.3} kHz", to_khz(m.spin_freq));
    let w: Vec<String> = m.site_freqs.iter().map(|w| format!("{:.2}", to_khz(*w))).collect();
    println!("  site frequencies (kHz): {}", w.join(" "));
    let d: Vec<String> = m
        .mode_spectrum()?
        .freqs
        .iter()
        .map(|w| format!("{:.2}", to_khz(*w)))
        .collect();
    println!("  collective frequencies (kHz): {}", d.join(" "));
    println!("  equilibrium: {}", m.is_equilibrium()?);
    Ok(())
}
