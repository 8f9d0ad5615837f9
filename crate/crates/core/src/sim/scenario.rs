use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, VarGroup};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MissingRate {
    High,
    Low,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FocusSize {
    Few,
    More,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SampleSize {
    Small,
    Large,
}

/// One cell of the 2×2×2 factorial design.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Scenario {
    pub missing: MissingRate,
    pub focus: FocusSize,
    pub size: SampleSize,
}

impl Scenario {
    pub const REMAINDER_RATE: f64 = 0.05;

    pub fn new(missing: MissingRate, focus: FocusSize, size: SampleSize) -> Self {
        Self { missing, focus, size }
    }

    /// All eight scenarios.
    pub fn factorial() -> Vec<Scenario> {
        let mut out = Vec::with_capacity(8);
        for missing in [MissingRate::High, MissingRate::Low] {
            for focus in [FocusSize::Few, FocusSize::More] {
                for size in [SampleSize::Small, SampleSize::Large] {
                    out.push(Scenario { missing, focus, size });
                }
            }
        }
        out
    }

    pub fn missing_rate_a(&self) -> f64 {
        match self.missing {
            MissingRate::High => 0.30,
            MissingRate::Low => 0.05,
        }
    }

    pub fn missing_rate_b(&self) -> f64 {
        Self::REMAINDER_RATE
    }

    pub fn n(&self) -> usize {
        match self.size {
            SampleSize::Small => 500,
            SampleSize::Large => 3000,
        }
    }

    /// (p_Ac, p_A).
    pub fn focus_dims(&self) -> (usize, usize) {
        match self.focus {
            FocusSize::Few => (2, 4),
            FocusSize::More => (4, 8),
        }
    }

    pub fn p_b(&self) -> usize {
        8
    }

    /// Probability that a unit has no masked cell.
    pub fn complete_case_rate(&self) -> f64 {
        let (_, p_a) = self.focus_dims();
        (1.0 - self.missing_rate_a()).powi(p_a as i32) * (1.0 - self.missing_rate_b()).powi(self.p_b() as i32)
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let m = match self.missing {
            MissingRate::High => "high",
            MissingRate::Low => "low",
        };
        let p = match self.focus {
            FocusSize::Few => "few",
            FocusSize::More => "more",
        };
        let n = match self.size {
            SampleSize::Small => "small",
            SampleSize::Large => "large",
        };
        write!(f, "{m}-{p}-{n}")
    }
}

impl FromStr for Scenario {
    type Err = Error;

    /// `high-few-small` (any of `-`, `/` or `_` as separator).
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(['-', '/', '_']).collect();
        let bad = || Error::InvalidArgument(format!("unknown scenario `{s}`"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let missing = match parts[0] {
            "high" => MissingRate::High,
            "low" => MissingRate::Low,
            _ => return Err(bad()),
        };
        let focus = match parts[1] {
            "few" => FocusSize::Few,
            "more" => FocusSize::More,
            _ => return Err(bad()),
        };
        let size = match parts[2] {
            "small" => SampleSize::Small,
            "large" => SampleSize::Large,
            _ => return Err(bad()),
        };
        Ok(Scenario { missing, focus, size })
    }
}

/// Mask every focus cell with the scenario's focus rate and every remainder
/// cell with the remainder rate, independently, in row-major order.
pub fn inject_mcar<R: Rng + ?Sized>(data: &Dataset, scenario: &Scenario, rng: &mut R) -> Dataset {
    inject_mcar_rates(data, scenario.missing_rate_a(), scenario.missing_rate_b(), rng)
}

pub fn inject_mcar_rates<R: Rng + ?Sized>(data: &Dataset, rate_a: f64, rate_b: f64, rng: &mut R) -> Dataset {
    let rates: Vec<f64> =
        data.schemas().iter().map(|s| if s.group == VarGroup::Focus { rate_a } else { rate_b }).collect();
    data.with_mask(|_, j| rng.random::<f64>() < rates[j])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn factorial_covers_all_levels() {
        let all = Scenario::factorial();
        assert_eq!(all.len(), 8);
        let names: std::collections::BTreeSet<String> = all.iter().map(|s| s.to_string()).collect();
        assert_eq!(names.len(), 8);
        for s in &all {
            assert_eq!(s.to_string().parse::<Scenario>().unwrap(), *s);
        }
        let s: Scenario = "high/few/small".parse().unwrap();
        assert_eq!((s.missing_rate_a(), s.n(), s.focus_dims()), (0.30, 500, (2, 4)));
        assert!("mid-few-small".parse::<Scenario>().is_err());
    }

    #[test]
    fn analytic_complete_case_rates() {
        let few: Scenario = "high-few-large".parse().unwrap();
        let more: Scenario = "high-more-large".parse().unwrap();
        assert!((few.complete_case_rate() - 0.7f64.powi(4) * 0.95f64.powi(8)).abs() < 1e-15);
        assert!((few.complete_case_rate() - 0.159).abs() < 5e-4);
        assert!((more.complete_case_rate() - 0.038).abs() < 5e-4);
    }

    #[test]
    fn mcar_rates_match_targets() {
        use crate::data::{Dataset, VarKind, VariableSchema};
        let schemas = vec![
            VariableSchema::new("y", VarKind::Ordinal, 3, VarGroup::Focus),
            VariableSchema::new("b", VarKind::Nominal, 2, VarGroup::Remainder),
        ];
        let rows = vec![vec![Some(1), Some(2)]; 40_000];
        let data = Dataset::from_rows(schemas, &rows).unwrap();
        let masked = inject_mcar_rates(&data, 0.3, 0.05, &mut crate::rng::named(5, "mask"));
        let rate = |c: usize| (0..masked.n()).filter(|&i| masked.is_missing(i, c)).count() as f64 / 40_000.0;
        let se = |q: f64| (q * (1.0 - q) / 40_000.0).sqrt();
        assert!((rate(0) - 0.3).abs() < 4.0 * se(0.3), "{}", rate(0));
        assert!((rate(1) - 0.05).abs() < 4.0 * se(0.05), "{}", rate(1));
        for i in 0..masked.n() {
            if !masked.is_missing(i, 0) {
                assert_eq!(masked.get(i, 0), Some(1));
            }
        }
    }
}
