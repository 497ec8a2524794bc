use crate::trainer::{RunMetrics, StepMetrics};

use super::{HarnessError, Result};

pub const HEADER: &str = "step,omega,mean_reward,accuracy,entropy,kl,mean_abs_advantage";

/// 17 significant digits, enough to round-trip any f64.
fn full(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn render(metrics: &RunMetrics) -> String {
    let mut out = String::with_capacity(64 + metrics.rows.len() * 160);
    out.push_str(HEADER);
    out.push('\n');
    for r in &metrics.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.step,
            full(r.omega),
            full(r.mean_reward),
            full(r.accuracy),
            full(r.entropy),
            full(r.kl),
            full(r.mean_abs_advantage)
        ));
    }
    out
}

pub fn parse(text: &str) -> Result<RunMetrics> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == HEADER => {}
        other => {
            return Err(HarnessError::Record {
                line: 1,
                message: format!("unexpected header {other:?}"),
            })
        }
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let bad = |message: String| HarnessError::Record { line: i + 2, message };
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 {
            return Err(bad(format!("expected 7 fields, got {}", fields.len())));
        }
        let num = |k: usize| -> Result<f64> {
            fields[k]
                .parse::<f64>()
                .map_err(|e| bad(format!("field {}: {e}", k + 1)))
        };
        rows.push(StepMetrics {
            step: fields[0].parse().map_err(|e| bad(format!("step: {e}")))?,
            omega: num(1)?,
            mean_reward: num(2)?,
            accuracy: num(3)?,
            entropy: num(4)?,
            kl: num(5)?,
            mean_abs_advantage: num(6)?,
        });
    }
    Ok(RunMetrics { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn values_survive_a_round_trip(vals in prop::collection::vec(prop::array::uniform6(-1e6f64..1e6), 0..20)) {
            let rows = vals
                .iter()
                .enumerate()
                .map(|(i, v)| StepMetrics {
                    step: i,
                    omega: v[0],
                    mean_reward: v[1],
                    accuracy: v[2],
                    entropy: v[3],
                    kl: v[4],
                    mean_abs_advantage: v[5],
                })
                .collect();
            let m = RunMetrics { rows };
            prop_assert_eq!(parse(&render(&m)).unwrap(), m);
        }
    }

    #[test]
    fn empty_run_is_header_only() {
        assert_eq!(render(&RunMetrics::default()), format!("{HEADER}\n"));
        assert!(parse("nope\n").is_err());
    }
}
