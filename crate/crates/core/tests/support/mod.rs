//! Independent reference implementations and the property suites built on
//! them. Shared by this crate's integration tests and the acceptance target.
#![allow(dead_code, clippy::neg_cmp_op_on_partial_ord, clippy::type_complexity, clippy::needless_range_loop)]

pub type Check = Result<(), String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

pub mod density;
pub mod metrics;
pub mod mining;
pub mod mlp;

/// Runs every check, collecting failures.
pub fn all(checks: &[(&str, fn() -> Check)]) -> Check {
    let failures: Vec<String> = checks
        .iter()
        .filter_map(|(name, check)| check().err().map(|e| format!("{name}: {e}")))
        .collect();
    if failures.is_empty() {
        Ok(())
    } else {
        Err(failures.join("; "))
    }
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}
