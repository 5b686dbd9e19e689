//! CSV and JSON emission. Floats are written with Rust's shortest
//! round-trip formatting, so identical runs produce byte-identical files.

use emx_core::analysis::{ErrorTable, OccupationRow, PathNorm, RateFit, ReferenceMode, Scheme};
use emx_core::GTransform64;
use serde::Serialize;

pub fn error_table_csv(
    table: &ErrorTable<f64>,
    p: f64,
    q: PathNorm<f64>,
    scheme: Scheme,
    reference: ReferenceMode,
) -> String {
    let mut out = String::from("n,error,std_error,M,p,q,scheme,reference\n");
    for row in &table.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            row.n, row.error, row.std_error, row.m, p, q, scheme, reference
        ));
    }
    out
}

pub fn occupation_csv(rows: &[OccupationRow<f64>]) -> String {
    let mut out = String::from("n,xi,mean_meas,pmean_meas,std_error,M\n");
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            row.n, row.xi, row.mean, row.pmean, row.std_error, row.m
        ));
    }
    out
}

pub fn transform_check_csv(transform: &GTransform64, min: f64, max: f64, points: usize) -> String {
    let mut out = String::from("x,g,g_prime,g_second,g_inverse_of_g\n");
    for j in 0..=points {
        let x = min + (max - min) * j as f64 / points as f64;
        let g = transform.g(x);
        let back = transform.invert(g).expect("invertible transform");
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            x,
            g,
            transform.g_prime(x),
            transform.g_second(x),
            back
        ));
    }
    out
}

pub fn simulate_csv(n_fine: usize, columns: &[(&str, &[f64])]) -> String {
    let mut out = String::from("t");
    for (name, _) in columns {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for j in 0..=n_fine {
        out.push_str(&format!("{}", j as f64 / n_fine as f64));
        for (_, values) in columns {
            out.push_str(&format!(",{}", values[j]));
        }
        out.push('\n');
    }
    out
}

/// A rate fit that may be unavailable (fewer than 3 positive error rows).
#[derive(Serialize)]
pub struct RateSummary {
    pub slope: Option<f64>,
    pub intercept: Option<f64>,
    pub r_squared: Option<f64>,
    pub excluded_rows: usize,
}

impl RateSummary {
    pub fn from_table(table: &ErrorTable<f64>) -> Self {
        let excluded = table
            .rows
            .iter()
            .filter(|r| r.error <= 0.0 || r.error.is_nan())
            .count();
        match emx_core::analysis::fit_rate(table) {
            Ok(RateFit {
                slope,
                intercept,
                r_squared,
            }) => RateSummary {
                slope: Some(slope),
                intercept: Some(intercept),
                r_squared: Some(r_squared),
                excluded_rows: excluded,
            },
            Err(_) => RateSummary {
                slope: None,
                intercept: None,
                r_squared: None,
                excluded_rows: excluded,
            },
        }
    }

    pub fn slope_label(&self) -> String {
        match self.slope {
            Some(slope) => format!("{slope:.3}"),
            None => "n/a".into(),
        }
    }
}
