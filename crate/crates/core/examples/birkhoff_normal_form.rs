//! Fourth-order Birkhoff normal form: solves the homological equation,
//! checks that the resonant part is integrable, and compares the action
//! coefficients and the frequency modulation matrix with closed forms.
//!
//! ```text
//! cargo run --release --example birkhoff_normal_form
//! ```

use kamwave::birkhoff::{
    modulation_determinant_formula, modulation_from_z4, modulation_matrix, solve_homological,
    verify_zminus_vanishing, z4_action_formula, z4_action_table, NormalFormConfig,
};
use kamwave::polyham::build_p4;
use kamwave::spectrum::{AdmissibleSet, FrequencySystem, Mass};

fn main() -> kamwave::Result<()> {
    let set = AdmissibleSet::new(&[0, 1, 5])?;
    let fs = FrequencySystem::new(Mass::new(1.2337)?, set.clone());
    let p4 = build_p4(12, &fs);
    let nf = solve_homological(&p4, &fs, &NormalFormConfig::default())?;
    println!(
        "P4: {} terms -> chi4 {}, Z4 {}, Q4 {}; relative residual {:.2e}; smallest divisor {:.3e}",
        p4.len(),
        nf.chi4.len(),
        nf.z4.len(),
        nf.q4.len(),
        nf.residual_norm,
        nf.gamma_min
    );

    let zm = verify_zminus_vanishing(&nf, &set);
    println!("non-integrable resonant terms left: {}", if zm.all_empty() { "none" } else { "some" });

    println!("\nI_l I_k coefficients (table vs closed form)");
    for (l, k, c) in z4_action_table(&nf) {
        println!("  ({l:>2},{k:>2})  {c:.15e}  {:.15e}", z4_action_formula(&fs, l, k));
    }

    let m = modulation_matrix(&fs);
    println!("\nmodulation matrix M{m:.6}");
    println!("det M = {:.12e}, closed form {:.12e}", m.determinant(), modulation_determinant_formula(&fs));
    println!("Hessian of the action part of Z4{:.6}", modulation_from_z4(&nf));
    Ok(())
}
