//! Synthetic Reddit-style dumps for demos, fixtures and benchmarks.
//!
//! Output depends only on [`DumpOptions`]; the same options always give the
//! same bytes.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::context::DocumentKind;
use crate::pipeline::{Mutation, Organization};

const OPENERS: &[&str] = &[
    "I have been struggling with",
    "Does anyone have advice about",
    "Quick question regarding",
    "Long time lurker, finally posting about",
    "Need a reality check on",
];

const TOPICS: &[(&str, &[&str])] = &[
    ("insurance", &[
        "My insurance denied the claim twice without any explanation",
        "The insurance company keeps asking for the same paperwork",
        "Switching insurance plans made my prescriptions cost triple",
    ]),
    ("appointments", &[
        "Getting an appointment with a specialist takes four months here",
        "The clinic cancelled my appointment the morning of the visit",
        "Evening appointments would make this so much easier for workers",
    ]),
    ("telehealth", &[
        "A telehealth visit saved me a two hour drive each way",
        "The video call kept freezing during my telehealth session",
        "My doctor seemed rushed and distracted over telehealth",
    ]),
    ("pharmacy", &[
        "The pharmacy ran out of my medication again this month",
        "Our local pharmacy staff explained the side effects really clearly",
        "Mail order pharmacy delivery arrived warm and possibly spoiled",
    ]),
    ("trust", &[
        "I stopped trusting doctors after being dismissed for years",
        "Finding a doctor who listens rebuilt my trust completely",
        "Online forums feel more trustworthy than the hospital pamphlets",
    ]),
    ("costs", &[
        "The surprise bill from the emergency room was over two thousand",
        "Generic medication costs dropped once I compared several pharmacies",
        "Nobody could tell me the costs before the procedure happened",
    ]),
];

const REPLIES: &[&str] = &[
    "Same experience here, it took months before anything changed",
    "Call the patient advocate office and ask for a written explanation",
    "Keep a log of every phone call with names and dates",
    "That sounds exhausting and you deserve better care than that",
    "Ask your doctor for samples while the pharmacy sorts things out",
    "Try the community health center because their fees slide with income",
];

#[derive(Debug, Clone)]
pub struct DumpOptions {
    pub subreddit: String,
    pub posts: usize,
    pub max_comments: usize,
    pub seed: u64,
    /// First submission time, epoch seconds.
    pub start_utc: i64,
    /// Seconds between consecutive submissions.
    pub spacing: i64,
    /// Mix in other subreddits, malformed lines, blank lines and deleted
    /// comments. None of it adds transcripts to `subreddit`.
    pub noise: bool,
}

impl Default for DumpOptions {
    fn default() -> Self {
        DumpOptions {
            subreddit: "HealthAccess".into(),
            posts: 30,
            max_comments: 3,
            seed: 7,
            start_utc: 1_650_000_000,
            spacing: 3_600,
            noise: true,
        }
    }
}

fn sentence(rng: &mut ChaCha8Rng, pool: &[&str]) -> String {
    pool.choose(rng).copied().unwrap_or_default().to_string()
}

/// Builds an NDJSON dump with `opts.posts` submissions in `opts.subreddit`.
pub fn synthetic_dump(opts: &DumpOptions) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut out = String::new();
    let push = |v: serde_json::Value, out: &mut String| {
        out.push_str(&v.to_string());
        out.push('\n');
    };
    for i in 0..opts.posts {
        let id = format!("p{i:04}");
        let created = opts.start_utc + opts.spacing * i as i64;
        let (topic, lines) = TOPICS[rng.random_range(0..TOPICS.len())];
        let (_, other) = TOPICS[rng.random_range(0..TOPICS.len())];
        let opener = sentence(&mut rng, OPENERS);
        let body = format!("{}. {}. {}.", sentence(&mut rng, lines), sentence(&mut rng, other), sentence(&mut rng, lines));
        push(
            json!({
                "id": id,
                "subreddit": opts.subreddit,
                "created_utc": created,
                "title": format!("{opener} {topic}"),
                "selftext": body,
            }),
            &mut out,
        );
        let comments = rng.random_range(0..=opts.max_comments);
        for c in 0..comments {
            let text = if rng.random_bool(0.5) {
                sentence(&mut rng, REPLIES)
            } else {
                sentence(&mut rng, lines)
            };
            push(
                json!({
                    "id": format!("c{i:04}{c}"),
                    "subreddit": opts.subreddit,
                    "created_utc": created + 60 * (c as i64 + 1),
                    "body": format!("{text}."),
                    "link_id": format!("t3_{id}"),
                    "parent_id": format!("t3_{id}"),
                }),
                &mut out,
            );
        }
        if opts.noise {
            match i % 5 {
                0 => push(
                    json!({
                        "id": format!("x{i:04}"),
                        "subreddit": "UnrelatedCooking",
                        "created_utc": created,
                        "title": "Best way to season a cast iron pan",
                        "selftext": "Asking for a friend who keeps burning onions.",
                    }),
                    &mut out,
                ),
                1 => out.push_str("{\"id\": \"broken\", \"subreddit\": \n"),
                2 => push(
                    json!({
                        "id": format!("d{i:04}"),
                        "subreddit": opts.subreddit,
                        "created_utc": created + 30,
                        "body": "[deleted]",
                        "link_id": format!("t3_{id}"),
                    }),
                    &mut out,
                ),
                3 => out.push('\n'),
                _ => out.push_str("not json at all\n"),
            }
        }
    }
    out
}

pub const RESEARCH_QUESTION: &str =
    "How do patients describe barriers to insurance, appointments, pharmacy access and telehealth?";

/// Mutations taking a fresh workspace through all six phases: one research
/// question, the first three generated concepts, then every machine step.
pub fn full_run(sample_size: usize, seed: u64) -> Vec<Mutation> {
    vec![
        Mutation::AddContext {
            kind: DocumentKind::ResearchQuestion,
            text: RESEARCH_QUESTION.into(),
        },
        Mutation::GenerateConcepts,
        Mutation::SelectConcepts {
            concept_ids: ["concept-001", "concept-002", "concept-003"].map(String::from).into(),
        },
        Mutation::GenerateOutline,
        Mutation::LoadData {
            sample_size: Some(sample_size),
            seed: Some(seed),
            filter: None,
        },
        Mutation::InitialCoding,
        Mutation::DeriveCodebook,
        Mutation::GlobalCoding,
        Mutation::ClusterCodes,
        Mutation::GenerateThemes,
        Mutation::BuildReport {
            organization: Organization::ThemeAndCode,
        },
    ]
}
