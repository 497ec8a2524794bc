//! Replay of three worked reference groups through the scoring pipeline.
//!
//! Each fixture carries reference values for every intermediate step. The
//! replay runs the library end to end and, separately, applies each step to
//! the reference output of the previous step, comparing at [`TOLERANCE`].
//! Rows of the noisy group that derive from its fifth fused reward (computed
//! with a 0.6 clip base although its noisy reward is 0.7) are reported as
//! discrepancies.

use std::fmt::Write as _;

use crate::advantage::{grpo_advantages, icpo_breakdown, normalize, Group, IcpoParams};
use crate::reward::fuse;
use crate::error::Result;
use crate::preference::build_pairs;
use crate::seqprob::SeqScore;

pub const TOLERANCE: f64 = 1e-3;

pub const OMEGA: f64 = 1.0;
pub const TAU: f64 = 2.0;
pub const DELTA: f64 = 0.4;

/// One reference worked group.
#[derive(Debug, Clone, Copy)]
pub struct Fixture {
    pub name: &'static str,
    pub mean_logprobs: [f64; 5],
    pub clean_rewards: [f64; 5],
    /// Rewards fed to the pipeline; differ from `clean_rewards` when noisy.
    pub rewards: [f64; 5],
    pub ranking: [usize; 5],
    pub scores: [f64; 5],
    pub fused: [f64; 5],
    pub grpo: [f64; 5],
    pub icpo: [f64; 5],
}

pub const GROUP_ONE: Fixture = Fixture {
    name: "worked-group-1",
    mean_logprobs: [-0.0135, -0.0583, -0.0216, -0.0090, -0.0407],
    clean_rewards: [0.1, 0.1, 1.0, 0.1, 1.0],
    rewards: [0.1, 0.1, 1.0, 0.1, 1.0],
    ranking: [2, 5, 3, 1, 4],
    scores: [0.2704, 0.5852, 0.4202, 0.0036, 0.4372],
    fused: [0.15, 0.15, 1.4202, 0.1036, 1.4372],
    grpo: [-0.816, -0.816, 1.225, -0.816, 1.225],
    icpo: [-0.7917, -0.7917, 1.2108, -0.8649, 1.2376],
};

pub const GROUP_TWO: Fixture = Fixture {
    name: "worked-group-2",
    mean_logprobs: [-0.0386, -0.0387, -0.0224, -0.0086, -0.2568],
    clean_rewards: [0.1, 0.1, 1.0, 0.1, 1.0],
    rewards: [0.1, 0.1, 1.0, 0.1, 1.0],
    ranking: [5, 2, 1, 3, 4],
    scores: [0.3454, 0.4777, 0.1569, 0.0034, 0.1186],
    fused: [0.15, 0.15, 1.1569, 0.1034, 1.1186],
    grpo: [-0.816, -0.816, 1.225, -0.816, 1.225],
    icpo: [-0.7842, -0.7842, 1.2626, -0.8790, 1.1847],
};

/// Noisy group. `grpo` holds the reference advantages computed from the
/// noisy rewards.
pub const NOISY_GROUP: Fixture = Fixture {
    name: "noisy-group",
    mean_logprobs: [-0.0135, -0.0583, -0.0216, -0.0090, -0.0407],
    clean_rewards: [0.1, 0.1, 1.0, 0.1, 1.0],
    rewards: [0.4, 0.1, 1.0, 0.4, 0.7],
    ranking: [2, 5, 3, 1, 4],
    scores: [0.2704, 0.5852, 0.4202, 0.0036, 0.4372],
    fused: [0.60, 0.15, 1.4202, 0.4036, 1.0],
    grpo: [-0.3371, -1.3485, 1.6856, -0.3371, 0.3371],
    icpo: [-0.2556, -1.2578, 1.5712, -0.6930, 0.6353],
};

pub fn fixture_group(f: &Fixture) -> Result<Group> {
    let scores = f
        .mean_logprobs
        .iter()
        .enumerate()
        .map(|(i, &m)| SeqScore::from_mean(i + 1, m))
        .collect::<Result<Vec<_>>>()?;
    Group::new(scores, f.rewards.to_vec())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    /// Known inconsistency in the reference numbers; shown, not gating.
    Discrepancy,
}

impl Status {
    fn label(self) -> &'static str {
        match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Discrepancy => "DISCREPANCY",
        }
    }
}

/// How a computed value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum View {
    /// Full pipeline from the reference log-probabilities and rewards.
    EndToEnd,
    /// One step applied to the reference output of the previous step.
    Stepwise,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub fixture: &'static str,
    pub view: View,
    pub quantity: String,
    pub computed: f64,
    pub reference: f64,
    pub status: Status,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Claim {
    pub fixture: &'static str,
    pub statement: String,
    pub holds: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReplayReport {
    pub checks: Vec<Check>,
    pub claims: Vec<Claim>,
    pub notes: Vec<String>,
}

impl ReplayReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.status != Status::Fail) && self.claims.iter().all(|c| c.holds)
    }

    pub fn check(&self, fixture: &str, view: View, quantity: &str) -> Option<&Check> {
        self.checks
            .iter()
            .find(|c| c.fixture == fixture && c.view == view && c.quantity == quantity)
    }

    pub fn claim_holds(&self, fixture: &str, statement_prefix: &str) -> Option<bool> {
        self.claims
            .iter()
            .find(|c| c.fixture == fixture && c.statement.starts_with(statement_prefix))
            .map(|c| c.holds)
    }

    fn push(
        &mut self,
        fixture: &'static str,
        view: View,
        quantity: String,
        computed: f64,
        reference: f64,
        known_discrepancy: bool,
    ) {
        let status = if known_discrepancy {
            Status::Discrepancy
        } else if (computed - reference).abs() <= TOLERANCE {
            Status::Pass
        } else {
            Status::Fail
        };
        self.checks.push(Check {
            fixture,
            view,
            quantity,
            computed,
            reference,
            status,
        });
    }

    fn claim(&mut self, fixture: &'static str, statement: impl Into<String>, holds: bool) {
        self.claims.push(Claim {
            fixture,
            statement: statement.into(),
            holds,
        });
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            let view = match c.view {
                View::EndToEnd => "pipeline",
                View::Stepwise => "stepwise",
            };
            let _ = writeln!(
                out,
                "{:<14} {:<9} {:<12} computed {:>10.6}  reference {:>10.6}  |diff| {:.2e}  {}",
                c.fixture,
                view,
                c.quantity,
                c.computed,
                c.reference,
                (c.computed - c.reference).abs(),
                c.status.label()
            );
        }
        for c in &self.claims {
            let _ = writeln!(
                out,
                "{:<14} {:<60} {}",
                c.fixture,
                c.statement,
                if c.holds { "PASS" } else { "FAIL" }
            );
        }
        for n in &self.notes {
            let _ = writeln!(out, "note: {n}");
        }
        let failed = self.checks.iter().filter(|c| c.status == Status::Fail).count()
            + self.claims.iter().filter(|c| !c.holds).count();
        let _ = writeln!(
            out,
            "{}: {} value checks, {} claims, {} failures (tolerance {:e})",
            if self.passed() { "OK" } else { "FAILED" },
            self.checks.len(),
            self.claims.len(),
            failed,
            TOLERANCE
        );
        out
    }
}

fn params() -> IcpoParams {
    IcpoParams {
        omega: OMEGA,
        tau: TAU,
        delta: DELTA,
    }
}

fn fmt_vec(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(", ")
}

/// Runs one fixture both ways. `noisy` marks the reference rows that derive
/// from the inconsistent fifth fused reward.
fn replay_fixture(report: &mut ReplayReport, f: &Fixture, noisy: bool) -> Result<(Vec<f64>, Vec<f64>)> {
    let group = fixture_group(f)?;
    let b = icpo_breakdown(&group, params())?;
    let grpo = grpo_advantages(&group)?;

    report.claim(f.name, format!("ranking {:?}", f.ranking), b.ranking.order() == f.ranking);
    report.claim(
        f.name,
        "10 preference pairs in rank order",
        build_pairs(&b.ranking).len() == 10,
    );

    use View::*;
    for i in 0..5 {
        report.push(f.name, EndToEnd, format!("S_p[{}]", i + 1), b.preference[i].score, f.scores[i], false);
    }
    for i in 0..5 {
        let known = noisy && i == 4;
        report.push(f.name, EndToEnd, format!("R_final[{}]", i + 1), b.fused[i].value, f.fused[i], known);
    }
    for i in 0..5 {
        report.push(f.name, EndToEnd, format!("A_grpo[{}]", i + 1), grpo.values[i], f.grpo[i], noisy);
    }
    for i in 0..5 {
        report.push(f.name, EndToEnd, format!("A_icpo[{}]", i + 1), b.advantages.values[i], f.icpo[i], noisy);
    }

    for i in 0..5 {
        let fused = fuse(f.rewards[i], f.scores[i], OMEGA, TAU)?;
        let known = noisy && i == 4;
        report.push(f.name, Stepwise, format!("R_final[{}]", i + 1), fused.value, f.fused[i], known);
    }
    let from_reference = normalize(&f.fused)?;
    for i in 0..5 {
        report.push(f.name, Stepwise, format!("A_icpo[{}]", i + 1), from_reference.values[i], f.icpo[i], false);
    }
    Ok((grpo.values, b.advantages.values))
}

pub fn replay_appendix() -> Result<ReplayReport> {
    let mut report = ReplayReport::default();

    let (grpo, icpo) = replay_fixture(&mut report, &GROUP_ONE, false)?;
    report.claim(GROUP_ONE.name, "ICPO A_5 > GRPO A_5 (low-confidence correct)", icpo[4] > grpo[4]);
    report.claim(GROUP_ONE.name, "ICPO A_4 < GRPO A_4 (confident incorrect)", icpo[3] < grpo[3]);
    report.claim(GROUP_ONE.name, "ICPO A_5 > ICPO A_3", icpo[4] > icpo[2]);

    let (grpo, icpo) = replay_fixture(&mut report, &GROUP_TWO, false)?;
    report.claim(
        GROUP_TWO.name,
        "ICPO A_5 < GRPO A_5 (extreme low confidence damped)",
        icpo[4] < grpo[4],
    );
    let recomputed_s5 = DELTA
        * (GROUP_TWO.mean_logprobs[1] + GROUP_TWO.mean_logprobs[0] + GROUP_TWO.mean_logprobs[2]
            + GROUP_TWO.mean_logprobs[3])
        / GROUP_TWO.mean_logprobs[4]
        - DELTA * GROUP_TWO.mean_logprobs[3];
    report.notes.push(format!(
        "{}: the reference S_p[1], S_p[2], S_p[5] do not follow from the reference log-probabilities \
         (e.g. S_p[5] = 0.4 * 0.1083 / 0.2568 + 0.0034 = {recomputed_s5:.4}, reference 0.1186); \
         later reference steps are consistent with the reference scores",
        GROUP_TWO.name
    ));

    let f = &NOISY_GROUP;
    let (noisy_grpo, icpo) = replay_fixture(&mut report, f, true)?;
    report.claim(
        f.name,
        "ICPO A_4 < noisy GRPO A_4 (inflated confident error)",
        icpo[3] < noisy_grpo[3],
    );
    report.claim(
        f.name,
        "ICPO A_5 > noisy GRPO A_5 (deflated correct response)",
        icpo[4] > noisy_grpo[4],
    );
    report.notes.push(format!(
        "{}: reference R_final[5] = {} uses clip base 0.6/2 with noisy reward 0.7; the pipeline gives 0.7 + min(S_p, 0.35) = 1.05",
        f.name, f.fused[4]
    ));
    report.notes.push(format!(
        "{}: reference noisy GRPO advantages [{}] correspond to a fifth reward of 0.6; from 0.7 they are [{}]",
        f.name,
        fmt_vec(&f.grpo),
        fmt_vec(&noisy_grpo)
    ));
    report.notes.push(format!(
        "{}: end-to-end ICPO advantages are [{}]; the stepwise rows normalize the reference fused rewards",
        f.name,
        fmt_vec(&icpo)
    ));
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn report_is_deterministic() {
        assert_eq!(
            replay_appendix().unwrap().render(),
            replay_appendix().unwrap().render()
        );
    }

    #[test]
    fn first_group_reproduces_end_to_end() {
        let r = replay_appendix().unwrap();
        let rows: Vec<_> = r
            .checks
            .iter()
            .filter(|c| c.fixture == GROUP_ONE.name && c.view == View::EndToEnd)
            .collect();
        assert_eq!(rows.len(), 20);
        assert!(rows.iter().all(|c| c.status == Status::Pass));
    }

    #[test]
    fn noisy_group_discrepancy_is_reported() {
        let r = replay_appendix().unwrap();
        let row = r.check(NOISY_GROUP.name, View::EndToEnd, "R_final[5]").unwrap();
        assert_eq!(row.status, Status::Discrepancy);
        assert!((row.computed - 1.05).abs() < 1e-12);
        for i in 1..=5 {
            let a = r.check(NOISY_GROUP.name, View::Stepwise, &format!("A_icpo[{i}]")).unwrap();
            assert_eq!(a.status, Status::Pass);
        }
        assert_eq!(r.claim_holds(NOISY_GROUP.name, "ICPO A_4 <"), Some(true));
        assert_eq!(r.claim_holds(NOISY_GROUP.name, "ICPO A_5 >"), Some(true));
    }

    #[test]
    fn second_group_reference_scores_do_not_follow_from_inputs() {
        let r = replay_appendix().unwrap();
        let failing: Vec<&str> = r
            .checks
            .iter()
            .filter(|c| c.fixture == GROUP_TWO.name && c.status == Status::Fail && c.view == View::Stepwise)
            .map(|c| c.quantity.as_str())
            .collect();
        // Every stepwise row downstream of the scores is consistent.
        assert!(failing.is_empty(), "{failing:?}");
        for q in ["S_p[1]", "S_p[2]", "S_p[5]"] {
            assert_eq!(r.check(GROUP_TWO.name, View::EndToEnd, q).unwrap().status, Status::Fail);
        }
        for q in ["S_p[3]", "S_p[4]"] {
            assert_eq!(r.check(GROUP_TWO.name, View::EndToEnd, q).unwrap().status, Status::Pass);
        }
        assert!(!r.passed());
    }
}
