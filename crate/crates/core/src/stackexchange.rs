//! Builds experiment instances from StackExchange data dumps: per-answer
//! Beta-posterior quality scores, expert filtering, empirical value
//! distributions, and the cost/budget rule.

use std::collections::HashMap;
use std::path::Path;

use quick_xml::events::Event;
use quick_xml::Reader;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::{Instance, Item, ValueDistribution};
use crate::rng::{Purpose, Seed};

/// Virtual up/down votes initializing each answer's posterior quality.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaPrior {
    pub virtual_up: f64,
    pub virtual_down: f64,
}

impl BetaPrior {
    pub fn new(virtual_up: f64, virtual_down: f64) -> Result<BetaPrior> {
        if !virtual_up.is_finite() || virtual_up <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "virtual up-votes {virtual_up} must be positive"
            )));
        }
        if !virtual_down.is_finite() || virtual_down <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "virtual down-votes {virtual_down} must be positive"
            )));
        }
        Ok(BetaPrior { virtual_up, virtual_down })
    }
}

/// One answer post with its aggregated vote counts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerRecord {
    pub answer_id: i64,
    pub question_id: i64,
    pub owner_user_id: i64,
    pub upvotes: u32,
    pub downvotes: u32,
}

/// A user with enough answers to be selectable, plus their per-answer
/// quality scores under the active prior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpertProfile {
    pub user_id: i64,
    /// Scores in [0, 1], ordered by answer id.
    pub answer_scores: Vec<f64>,
    /// Arithmetic mean of all answer scores.
    pub mu_hat: f64,
}

/// Posterior mean quality of an answer: (u + a0) / (u + d + a0 + b0).
pub fn answer_score(upvotes: u32, downvotes: u32, prior: &BetaPrior) -> f64 {
    (upvotes as f64 + prior.virtual_up)
        / (upvotes as f64 + downvotes as f64 + prior.virtual_up + prior.virtual_down)
}

fn attr_value(e: &quick_xml::events::BytesStart, name: &[u8]) -> Result<Option<String>> {
    for attr in e.attributes() {
        let attr = attr.map_err(|err| Error::Parse { line: 0, message: err.to_string() })?;
        if attr.key.as_ref() == name {
            let value = attr
                .normalized_value(quick_xml::XmlVersion::default())
                .map_err(|err| Error::Parse { line: 0, message: err.to_string() })?;
            return Ok(Some(value.into_owned()));
        }
    }
    Ok(None)
}

fn line_of(content: &str, byte_pos: usize) -> usize {
    content[..byte_pos.min(content.len())]
        .bytes()
        .filter(|&b| b == b'\n')
        .count()
        + 1
}

/// Walks the row elements of one dump document, handing each row's start tag
/// to `visit`. Errors carry the line number of the offending content.
fn for_each_row(
    content: &str,
    mut visit: impl FnMut(&quick_xml::events::BytesStart) -> Result<()>,
) -> Result<()> {
    let mut reader = Reader::from_str(content);
    let locate = |reader: &Reader<&[u8]>| line_of(content, reader.buffer_position() as usize);
    loop {
        match reader.read_event() {
            Ok(Event::Empty(e)) | Ok(Event::Start(e)) => {
                if e.name().as_ref() == b"row" {
                    visit(&e).map_err(|err| match err {
                        Error::Parse { line: 0, message } => {
                            Error::Parse { line: locate(&reader), message }
                        }
                        other => other,
                    })?;
                }
            }
            Ok(Event::Eof) => return Ok(()),
            Ok(_) => {}
            Err(e) => {
                return Err(Error::Parse { line: locate(&reader), message: e.to_string() });
            }
        }
    }
}

/// Parse a posts document and a votes document into answer records with
/// aggregated vote counts. Answers are post rows with type 2; votes count
/// type 2 as up and type 3 as down, other vote types are ignored. Rows
/// missing an owner are dropped; answers with no votes get (0, 0).
pub fn parse_dump_str(posts: &str, votes: &str) -> Result<Vec<AnswerRecord>> {
    // answer id -> (question, owner)
    let mut answers: Vec<(i64, i64, i64)> = Vec::new();
    for_each_row(posts, |e| {
        let post_type = attr_value(e, b"PostTypeId")?;
        if post_type.as_deref() != Some("2") {
            return Ok(());
        }
        let id = match attr_value(e, b"Id")? {
            Some(v) => v
                .parse::<i64>()
                .map_err(|err| Error::Parse { line: 0, message: format!("bad Id {v}: {err}") })?,
            None => return Err(Error::Parse { line: 0, message: "row without Id".into() }),
        };
        let owner = match attr_value(e, b"OwnerUserId")? {
            Some(v) => v.parse::<i64>().map_err(|err| Error::Parse {
                line: 0,
                message: format!("bad OwnerUserId {v}: {err}"),
            })?,
            None => return Ok(()), // deleted account; unusable as an expert sample
        };
        let question = match attr_value(e, b"ParentId")? {
            Some(v) => v.parse::<i64>().map_err(|err| Error::Parse {
                line: 0,
                message: format!("bad ParentId {v}: {err}"),
            })?,
            None => -1,
        };
        answers.push((id, question, owner));
        Ok(())
    })?;

    let mut counts: HashMap<i64, (u32, u32)> = HashMap::new();
    for_each_row(votes, |e| {
        let post = match attr_value(e, b"PostId")? {
            Some(v) => v.parse::<i64>().map_err(|err| Error::Parse {
                line: 0,
                message: format!("bad PostId {v}: {err}"),
            })?,
            None => return Ok(()),
        };
        match attr_value(e, b"VoteTypeId")?.as_deref() {
            Some("2") => counts.entry(post).or_insert((0, 0)).0 += 1,
            Some("3") => counts.entry(post).or_insert((0, 0)).1 += 1,
            _ => {}
        }
        Ok(())
    })?;

    let mut records: Vec<AnswerRecord> = answers
        .into_iter()
        .map(|(answer_id, question_id, owner_user_id)| {
            let (upvotes, downvotes) = counts.get(&answer_id).copied().unwrap_or((0, 0));
            AnswerRecord { answer_id, question_id, owner_user_id, upvotes, downvotes }
        })
        .collect();
    records.sort_by_key(|r| r.answer_id);
    Ok(records)
}

/// File-based wrapper around [`parse_dump_str`].
pub fn parse_dump(posts_path: &Path, votes_path: &Path) -> Result<Vec<AnswerRecord>> {
    let posts = std::fs::read_to_string(posts_path)?;
    let votes = std::fs::read_to_string(votes_path)?;
    parse_dump_str(&posts, &votes)
}

/// Drop answers that received no votes at all. Zero-vote answers evaluate
/// to the prior mean and are included by default; this filter is the
/// opt-out.
pub fn filter_unvoted(records: &[AnswerRecord]) -> Vec<AnswerRecord> {
    records
        .iter()
        .filter(|r| r.upvotes > 0 || r.downvotes > 0)
        .cloned()
        .collect()
}

/// Group answers by owner, keep users with at least `min_answers` of them,
/// and score every answer under `prior`. Profiles are ordered by user id and
/// scores by answer id, so the output is deterministic.
pub fn build_profiles(
    records: &[AnswerRecord],
    min_answers: usize,
    prior: &BetaPrior,
) -> Result<Vec<ExpertProfile>> {
    if min_answers < 1 {
        return Err(Error::InvalidParameter("min_answers must be at least 1".into()));
    }
    let mut by_owner: HashMap<i64, Vec<&AnswerRecord>> = HashMap::new();
    for r in records {
        by_owner.entry(r.owner_user_id).or_default().push(r);
    }
    let mut profiles: Vec<ExpertProfile> = by_owner
        .into_iter()
        .filter(|(_, rs)| rs.len() >= min_answers)
        .map(|(user_id, mut rs)| {
            rs.sort_by_key(|r| r.answer_id);
            let answer_scores: Vec<f64> =
                rs.iter().map(|r| answer_score(r.upvotes, r.downvotes, prior)).collect();
            let mu_hat = answer_scores.iter().sum::<f64>() / answer_scores.len() as f64;
            ExpertProfile { user_id, answer_scores, mu_hat }
        })
        .collect();
    profiles.sort_by_key(|p| p.user_id);
    Ok(profiles)
}

/// Held-out evaluation samples for one expert.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestSamples {
    pub user_id: i64,
    pub scores: Vec<f64>,
}

/// A ready-to-solve instance plus its held-out test table.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentData {
    pub instance: Instance,
    pub test_samples: Vec<TestSamples>,
    /// How many item costs hit the budget cap under the cost rule.
    pub truncated_costs: usize,
}

/// Number of training scores drawn per expert (the rest of the 130-draw
/// sample is the held-out test set).
pub const TRAIN_SAMPLES_PER_EXPERT: usize = 100;

/// Build an instance from expert profiles: per user, draw
/// `TRAIN_SAMPLES_PER_EXPERT + holdout` scores at random without replacement
/// (seeded), split them train/test, estimate the mean from the training
/// part, set the budget to `budget_fraction` times the sum of estimated
/// means, and the cost to min(1 + lambda * mean, budget). Training scores
/// become the item's empirical value distribution.
pub fn build_instance(
    profiles: &[ExpertProfile],
    lambda: f64,
    holdout: usize,
    budget_fraction: f64,
    seed: Seed,
) -> Result<ExperimentData> {
    if profiles.is_empty() {
        return Err(Error::Domain("no expert profiles".into()));
    }
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(Error::InvalidParameter(format!("lambda {lambda} must be nonnegative")));
    }
    if !budget_fraction.is_finite() || budget_fraction <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "budget fraction {budget_fraction} must be positive"
        )));
    }
    let mut trains: Vec<(i64, Vec<f64>)> = Vec::with_capacity(profiles.len());
    let mut test_samples = Vec::with_capacity(profiles.len());
    for p in profiles {
        if p.answer_scores.len() < holdout + 1 {
            return Err(Error::Domain(format!(
                "user {} has {} scores, need more than the {holdout} held out",
                p.user_id,
                p.answer_scores.len()
            )));
        }
        let mut order: Vec<usize> = (0..p.answer_scores.len()).collect();
        let mut rng = seed.stream(Purpose::Split, &[p.user_id as u64]);
        rng.shuffle(&mut order);
        let test: Vec<f64> = order[..holdout].iter().map(|&i| p.answer_scores[i]).collect();
        let train_len = TRAIN_SAMPLES_PER_EXPERT.min(order.len() - holdout);
        let train: Vec<f64> =
            order[holdout..holdout + train_len].iter().map(|&i| p.answer_scores[i]).collect();
        test_samples.push(TestSamples { user_id: p.user_id, scores: test });
        trains.push((p.user_id, train));
    }

    let mu_hats: Vec<f64> =
        trains.iter().map(|(_, t)| t.iter().sum::<f64>() / t.len() as f64).collect();
    let budget = budget_fraction * mu_hats.iter().sum::<f64>();
    if budget <= 0.0 {
        return Err(Error::Domain("budget rule produced a nonpositive budget".into()));
    }
    let mut truncated = 0;
    let mut items = Vec::with_capacity(trains.len());
    for ((user_id, train), mu_hat) in trains.into_iter().zip(&mu_hats) {
        let raw_cost = 1.0 + lambda * mu_hat;
        let cost = if raw_cost > budget {
            truncated += 1;
            budget
        } else {
            raw_cost
        };
        items.push(Item::new(
            user_id as u64,
            cost,
            ValueDistribution::Empirical { samples: train },
        )?);
    }
    let instance = Instance::new(items, budget)?;
    Ok(ExperimentData { instance, test_samples, truncated_costs: truncated })
}

/// Profiles CSV: user_id, n_answers, mu_hat.
pub fn profiles_csv(profiles: &[ExpertProfile]) -> String {
    let mut out = String::from("user_id,n_answers,mu_hat\n");
    for p in profiles {
        out.push_str(&format!("{},{},{:?}\n", p.user_id, p.answer_scores.len(), p.mu_hat));
    }
    out
}

/// Test-sample CSV: user_id, score (one row per held-out score).
pub fn test_samples_csv(samples: &[TestSamples]) -> String {
    let mut out = String::from("user_id,score\n");
    for s in samples {
        for v in &s.scores {
            out.push_str(&format!("{},{:?}\n", s.user_id, v));
        }
    }
    out
}
