use std::str::FromStr;

use crate::{Error, Result};

/// Endpoint-method, channel and file counts as a distance from the origin,
/// per logical line of code.
pub fn attack_surface(endpoint_methods: u64, channels: u64, files: u64, sloc: f64) -> Result<f64> {
    if !(sloc > 0.0) {
        return Err(Error::Config(format!("SLOC must be positive, got {sloc}")));
    }
    let [a, b, c] = [endpoint_methods, channels, files].map(|n| n as f64);
    Ok((a * a + b * b + c * c).sqrt() / sloc)
}

/// How the age of a known vulnerability discounts its severity.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum VulnFormula {
    /// `cvss * (100 - years / 100)`
    #[default]
    Printed,
    /// `cvss * (100 - years) / 100`
    Corrected,
}

impl FromStr for VulnFormula {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "printed" => Ok(VulnFormula::Printed),
            "corrected" => Ok(VulnFormula::Corrected),
            _ => Err(Error::Config(format!("unknown vulnerableness formula `{s}` (printed or corrected)"))),
        }
    }
}

/// Count of vulnerabilities without a severity score plus the age-weighted
/// severity of every scored one, given as `(cvss, years since found)`.
pub fn vulnerableness(unscored: u64, scored: &[(f64, f64)], formula: VulnFormula) -> f64 {
    let weighted: f64 = scored
        .iter()
        .map(|(cvss, years)| match formula {
            VulnFormula::Printed => cvss * (100.0 - years / 100.0),
            VulnFormula::Corrected => cvss * (100.0 - years) / 100.0,
        })
        .sum();
    unscored as f64 + weighted
}

/// Path count and mean path length, each per thousand lines of code.
pub fn path_stats(lengths: &[usize], ksloc: f64) -> Result<(f64, f64)> {
    if !(ksloc > 0.0) {
        return Err(Error::Config(format!("KSLOC must be positive, got {ksloc}")));
    }
    if lengths.is_empty() {
        return Ok((0.0, 0.0));
    }
    let mean = lengths.iter().sum::<usize>() as f64 / lengths.len() as f64;
    Ok((lengths.len() as f64 / ksloc, mean / ksloc))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn attack_surface_examples() {
        assert_eq!(attack_surface(0, 0, 0, 123.0).unwrap(), 0.0);
        assert_eq!(attack_surface(3, 4, 0, 1.0).unwrap(), 5.0);
        assert!((attack_surface(2, 3, 6, 1000.0).unwrap() - 0.007).abs() < 1e-15);
        assert!(attack_surface(1, 1, 1, 0.0).is_err());
    }

    #[test]
    fn vulnerableness_examples() {
        assert_eq!(vulnerableness(0, &[], VulnFormula::Printed), 0.0);
        assert_eq!(vulnerableness(2, &[], VulnFormula::Printed), 2.0);
        assert!((vulnerableness(0, &[(5.0, 10.0)], VulnFormula::Printed) - 499.5).abs() < 1e-12);
        assert!((vulnerableness(0, &[(5.0, 10.0)], VulnFormula::Corrected) - 4.5).abs() < 1e-12);
    }

    #[test]
    fn path_stat_examples() {
        assert_eq!(path_stats(&[], 1.0).unwrap(), (0.0, 0.0));
        assert_eq!(path_stats(&[2, 2, 5], 1.0).unwrap(), (3.0, 3.0));
        let (c, l) = path_stats(&[2, 2, 5], 10.0).unwrap();
        assert!((c - 0.3).abs() < 1e-12 && (l - 0.3).abs() < 1e-12);
        assert!(path_stats(&[1], 0.0).is_err());
    }
}
