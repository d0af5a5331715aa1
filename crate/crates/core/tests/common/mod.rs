//! Synthetic collections for integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sigaudit::{DocId, Qrels, RankedList, Run, RunPool, TopicId};

pub struct Collection {
    pub pool: RunPool,
    pub gold: Qrels,
    pub alt: Qrels,
}

pub struct Spec {
    pub runs: usize,
    pub gold_topics: Vec<String>,
    pub alt_topics: Vec<String>,
    pub docs: usize,
    /// Probability an alternative grade is redrawn at random.
    pub noise: f64,
    pub seed: u64,
}

pub fn topics(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|t| format!("{prefix}{t}")).collect()
}

fn grade(rng: &mut ChaCha8Rng) -> u32 {
    match rng.gen_range(0..10) {
        0..=4 => 0,
        5..=6 => 1,
        7..=8 => 2,
        _ => 3,
    }
}

fn judge(rng: &mut ChaCha8Rng, name: &str, topics: &[String], docs: usize) -> Qrels {
    let mut q = Qrels::new(name);
    for t in topics {
        for d in 0..docs {
            q.insert(TopicId::new(t.as_str()).unwrap(), DocId::new(format!("{t}-d{d}")).unwrap(), grade(rng));
        }
        // at least one doc at every grade so AP and NDCG both keep the topic
        q.insert(TopicId::new(t.as_str()).unwrap(), DocId::new(format!("{t}-d0")).unwrap(), 3);
    }
    q
}

/// Runs come in tiers of two with equal retrieval quality, so a collection
/// has both clearly different and indistinguishable run pairs.
pub fn synthetic(spec: &Spec) -> Collection {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let gold = judge(&mut rng, "gold", &spec.gold_topics, spec.docs);
    let mut alt = Qrels::new("alt");
    let alt_base = judge(&mut rng, "alt-base", &spec.alt_topics, spec.docs);
    for t in &spec.alt_topics {
        let truth = gold.topic(t).or_else(|| alt_base.topic(t)).unwrap();
        let mut docs: Vec<_> = truth.iter().collect();
        docs.sort();
        for (d, &g) in docs {
            let g = if rng.gen_bool(spec.noise) { grade(&mut rng) } else { g };
            alt.insert(TopicId::new(t.as_str()).unwrap(), d.clone(), g);
        }
    }

    let all_topics: std::collections::BTreeSet<&String> =
        spec.gold_topics.iter().chain(&spec.alt_topics).collect();
    let tiers = spec.runs.div_ceil(2).max(1);
    let runs = (0..spec.runs)
        .map(|r| {
            let quality = 0.2 + 2.0 * (r / 2) as f64 / tiers as f64;
            let lists: BTreeMap<TopicId, RankedList> = all_topics
                .iter()
                .map(|t| {
                    let truth = gold.topic(t).or_else(|| alt_base.topic(t)).unwrap();
                    let mut judged: Vec<_> = truth.iter().collect();
                    judged.sort();
                    let entries = judged
                        .into_iter()
                        .map(|(d, &g)| (d.clone(), g as f64 * quality + 3.0 * rng.gen::<f64>()))
                        .collect();
                    (TopicId::new(t.as_str()).unwrap(), RankedList::new(entries).unwrap())
                })
                .collect();
            Run::new(format!("run{r:02}"), lists).unwrap()
        })
        .collect();
    Collection {
        pool: RunPool::new(runs).unwrap(),
        gold,
        alt,
    }
}

pub fn write_qrels(q: &Qrels, path: &Path) {
    let mut out = fs::File::create(path).unwrap();
    for t in q.topics() {
        let mut docs: Vec<_> = q.topic(t.as_str()).unwrap().iter().collect();
        docs.sort();
        for (d, g) in docs {
            writeln!(out, "{t} 0 {d} {g}").unwrap();
        }
    }
}

pub fn write_collection(c: &Collection, dir: &Path) {
    let runs = dir.join("runs");
    fs::create_dir_all(&runs).unwrap();
    for run in c.pool.runs() {
        let f = fs::File::create(runs.join(format!("{}.run", run.tag()))).unwrap();
        run.write_trec(std::io::BufWriter::new(f)).unwrap();
    }
    write_qrels(&c.gold, &dir.join("gold.qrels"));
    write_qrels(&c.alt, &dir.join("alt.qrels"));
}
