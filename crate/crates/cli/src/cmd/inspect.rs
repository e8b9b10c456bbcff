use std::path::PathBuf;

use clap::Args;
use truelearn::store::load_snapshot;
use truelearn::LearnerState;

use crate::error::{CliError, CliResult};

const SUGGESTIONS: usize = 5;

#[derive(Args, Debug)]
pub struct InspectArgs {
    /// Snapshot written by `evaluate --snapshot`
    #[arg(long, value_name = "PATH")]
    snapshot: PathBuf,
    /// Learner id to show
    #[arg(long)]
    learner: String,
    /// Show at most this many skills, highest mean first
    #[arg(long, default_value_t = 20)]
    top: usize,
}

pub fn run(args: InspectArgs) -> CliResult {
    let snapshot = load_snapshot(&args.snapshot)
        .map_err(|e| CliError::Data(format!("{}: {e}", args.snapshot.display())))?;
    let Some(state) = snapshot.states.get(&args.learner) else {
        let near = nearest_ids(&args.learner, snapshot.states.keys().map(String::as_str));
        let hint = if near.is_empty() {
            "the snapshot holds no learners".to_owned()
        } else {
            format!("nearest ids: {}", near.join(", "))
        };
        return Err(CliError::Data(format!(
            "learner `{}` not in {}; {hint}",
            args.learner,
            args.snapshot.display()
        )));
    };
    print!("{}", render(&args.learner, state, args.top));
    Ok(())
}

fn nearest_ids<'a>(target: &str, ids: impl Iterator<Item = &'a str>) -> Vec<&'a str> {
    let mut scored: Vec<(usize, &str)> = ids.map(|id| (strsim::levenshtein(target, id), id)).collect();
    scored.sort();
    scored.into_iter().take(SUGGESTIONS).map(|(_, id)| id).collect()
}

fn render(learner: &str, state: &LearnerState, top: usize) -> String {
    let mut out = format!(
        "learner {learner}: {} events, {} engaged\n",
        state.event_count, state.engaged_count
    );
    if state.skills.is_empty() && !state.kt_skills.is_empty() {
        let mut rows: Vec<_> = state.kt_skills.iter().collect();
        rows.sort_by(|a, b| b.1.total_cmp(a.1).then_with(|| a.0.cmp(b.0)));
        out += &format!("{:<40} {:>10}\n", "kc", "p(known)");
        for (kc, p) in rows.into_iter().take(top) {
            out += &format!("{kc:<40} {p:>10.4}\n");
        }
        return out;
    }
    let mut rows: Vec<_> = state.skills.iter().collect();
    rows.sort_by(|a, b| b.1.mean.total_cmp(&a.1.mean).then_with(|| a.0.cmp(b.0)));
    out += &format!("{:<40} {:>10} {:>10} {:>6}\n", "kc", "mean", "std", "obs");
    for (kc, belief) in rows.into_iter().take(top) {
        out += &format!(
            "{kc:<40} {:>10.4} {:>10.4} {:>6}\n",
            belief.mean,
            belief.std_dev(),
            belief.observations
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use truelearn::SkillBelief;

    #[test]
    fn nearest_ids_ranks_by_edit_distance() {
        let ids = ["learner-0001", "learner-0002", "zed", "learner-0100"];
        let near = nearest_ids("learner-001", ids.into_iter());
        assert_eq!(near[..2], ["learner-0001", "learner-0002"]);
        assert_eq!(near.len(), 4);
    }

    #[test]
    fn rows_sorted_by_mean_and_truncated() {
        let mut s = LearnerState::new();
        for (kc, mean) in [("a", 0.1), ("b", 0.9), ("c", -0.5)] {
            s.skills.insert(kc.into(), SkillBelief { mean, variance: 0.25, observations: 2 });
        }
        let text = render("x", &s, 20);
        let kcs: Vec<&str> = text.lines().skip(2).map(|l| l.split_whitespace().next().unwrap()).collect();
        assert_eq!(kcs, ["b", "a", "c"]);
        assert_eq!(render("x", &s, 1).lines().count(), 3);
    }
}
