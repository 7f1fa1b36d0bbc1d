//! Tidy long-format plot data (series,x,y) plus a generated README fragment
//! documenting what each series means.

use crate::experiments::Series;

pub fn plot_csv(series: &[Series]) -> Vec<u8> {
    let mut out = String::from("series,x,y\n");
    for s in series {
        for &(x, y) in &s.points {
            out.push_str(&format!("{},{},{}\n", s.name, x, y));
        }
    }
    out.into_bytes()
}

pub fn plot_readme(kind: &str, series: &[Series]) -> Vec<u8> {
    let mut out = String::new();
    out.push_str("# Plot data columns\n\n");
    out.push_str(&format!("Generated by the `{kind}` experiment.\n\n"));
    out.push_str("`plot_data.csv` is tidy long format: one row per point with columns\n");
    out.push_str("`series` (series name), `x`, `y`.\n\n");
    for s in series {
        out.push_str(&format!("- `{}`: {}\n", s.name, describe(&s.name)));
        for (k, v) in &s.meta {
            out.push_str(&format!("  - {k}: {v}\n"));
        }
    }
    out.into_bytes()
}

fn describe(name: &str) -> &'static str {
    match name {
        "mass_c0_vs_r" => "derivative-free annulus mass against the evaluation radius",
        "mass_c2_vs_r" => "surface mass at the annulus midpoint against the evaluation radius",
        "sup_Dh_vs_t" => "sup norm of the first covariant derivative of the perturbation against flow time (positive data, intended for log-log axes)",
        "sup_h_vs_t" => "sup norm of the perturbation against flow time",
        "drift_vs_r" => "integral of |d/dt| of the bracketed annulus functional against radius",
        "gap_vs_r" => "two-radius mass gap against the smaller radius",
        "kernel_mass_vs_t" => "total kernel mass under the hyperbolic volume measure against time",
        "pref_times_product_vs_t" => "exponential prefactor times the infinite product of the lower-bound certificate against the probe time",
        "criterion_pass" => "verification criteria by index",
        _ => "experiment series",
    }
}
