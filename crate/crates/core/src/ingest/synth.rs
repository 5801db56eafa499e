//! Seeded synthetic datasets with planted per-user topic preferences.
//!
//! Every user likes one to three topics. Impressions are drawn with topic
//! probability proportional to `affinity + IMPRESSION_FLOOR`, and the behavior
//! on an impression is drawn from a discretized Gaussian over the six ranks
//! centered at `5 * affinity`, with precision `affinity_sharpness`. Liked
//! affinities are normalized so each user's favourite topic has affinity
//! exactly 1; the other topics get a small affinity below
//! `UNLIKED_AFFINITY_MAX`.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{
    Behavior, BehaviorLog, Dataset, NewsRecord, TopicRecord, UserProfile, NULL_TAG, TAG_SLOTS,
};
use crate::error::{Error, Result};

const BASE_TIMESTAMP: i64 = 1_529_400_000;
const SPAN_SECONDS: i64 = 7 * 86_400;
const IMPRESSION_FLOOR: f64 = 0.02;
const LIKED_AFFINITY_MIN: f64 = 0.3;
const UNLIKED_AFFINITY_MAX: f64 = 0.08;
const TOPIC_WORDS: usize = 12;
const COMMON_WORDS: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n_users: usize,
    pub n_news: usize,
    pub n_topics: usize,
    pub n_tags: usize,
    pub n_cat1: usize,
    pub n_cat2: usize,
    pub n_posters: usize,
    pub logs_per_user: usize,
    pub affinity_sharpness: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_users: 2000,
            n_news: 500,
            n_topics: 8,
            n_tags: 40,
            n_cat1: 4,
            n_cat2: 8,
            n_posters: 50,
            logs_per_user: 26,
            affinity_sharpness: 5.0,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("n_users", self.n_users),
            ("n_news", self.n_news),
            ("n_topics", self.n_topics),
            ("n_tags", self.n_tags),
            ("n_cat1", self.n_cat1),
            ("n_cat2", self.n_cat2),
            ("n_posters", self.n_posters),
            ("logs_per_user", self.logs_per_user),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::invalid(format!("{name} must be at least 1")));
            }
        }
        if !(self.affinity_sharpness > 0.0 && self.affinity_sharpness.is_finite()) {
            return Err(Error::invalid("affinity_sharpness must be positive"));
        }
        Ok(())
    }
}

/// Behavior distribution for a given affinity in [0, 1].
pub(crate) fn behavior_weights(affinity: f64, sharpness: f64) -> [f64; 6] {
    let center = 5.0 * affinity;
    let mut w = [0.0; 6];
    let logits: Vec<f64> = (0..6)
        .map(|r| -sharpness * (r as f64 - center).powi(2))
        .collect();
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    for (wi, l) in w.iter_mut().zip(&logits) {
        *wi = (l - max).exp();
    }
    w
}

fn roulette(rng: &mut ChaCha8Rng, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    let mut x = rng.gen::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if x < *w {
            return i;
        }
        x -= w;
    }
    weights.len() - 1
}

pub fn generate_synthetic(cfg: &SynthConfig) -> Result<Dataset> {
    generate_with_affinity(cfg).map(|(ds, _)| ds)
}

/// Like [`generate_synthetic`], also returning each user's latent topic
/// affinity vector (indexed like the topic index).
pub(crate) fn generate_with_affinity(cfg: &SynthConfig) -> Result<(Dataset, Vec<Vec<f64>>)> {
    cfg.validate()?;
    let mut affinities = Vec::with_capacity(cfg.n_users);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    // Every tag belongs to exactly one topic pool, so all tags are referenced.
    let mut pools: Vec<Vec<usize>> = vec![Vec::new(); cfg.n_topics];
    for tag in 0..cfg.n_tags {
        pools[tag % cfg.n_topics].push(tag);
    }

    let topics: Vec<TopicRecord> = (0..cfg.n_topics)
        .map(|t| TopicRecord {
            topic_id: format!("t{t}"),
            title: (0..3).map(|j| format!("w{t}_{j}")).collect(),
            cat1_id: format!("c1_{}", t % cfg.n_cat1),
            cat2_id: format!("c2_{}", t % cfg.n_cat2),
            tag_ids: pools[t].iter().map(|g| format!("g{g}")).collect(),
        })
        .collect();

    let mut news_by_topic: Vec<Vec<usize>> = vec![Vec::new(); cfg.n_topics];
    let mut news = Vec::with_capacity(cfg.n_news);
    for i in 0..cfg.n_news {
        let t = i % cfg.n_topics;
        news_by_topic[t].push(i);
        let poster = if i < cfg.n_posters {
            i
        } else {
            rng.gen_range(0..cfg.n_posters)
        };
        let n_tags = rng.gen_range(1..=TAG_SLOTS.min(cfg.n_tags));
        let mut tags: Vec<usize> = Vec::with_capacity(n_tags);
        while tags.len() < n_tags {
            let tag = if !pools[t].is_empty() && rng.gen_bool(0.7) {
                *pools[t].choose(&mut rng).expect("non-empty pool")
            } else {
                rng.gen_range(0..cfg.n_tags)
            };
            if !tags.contains(&tag) {
                tags.push(tag);
            }
        }
        let mut tag_ids: Vec<String> = tags.iter().map(|g| format!("g{g}")).collect();
        tag_ids.resize(TAG_SLOTS, NULL_TAG.to_string());
        let len = rng.gen_range(6..=12);
        let content = (0..len)
            .map(|_| {
                if rng.gen_bool(0.7) {
                    format!("w{t}_{}", rng.gen_range(0..TOPIC_WORDS))
                } else {
                    format!("c{}", rng.gen_range(0..COMMON_WORDS))
                }
            })
            .collect();
        news.push(NewsRecord {
            news_id: format!("n{i}"),
            topic_id: format!("t{t}"),
            content,
            cat1_id: topics[t].cat1_id.clone(),
            cat2_id: topics[t].cat2_id.clone(),
            poster_id: format!("p{poster}"),
            tag_ids,
        });
    }

    let shown_topics: Vec<usize> = (0..cfg.n_topics)
        .filter(|t| !news_by_topic[*t].is_empty())
        .collect();

    let mut profiles = Vec::with_capacity(cfg.n_users);
    let mut logs = Vec::with_capacity(cfg.n_users * cfg.logs_per_user);
    for u in 0..cfg.n_users {
        let user_id = format!("u{u}");
        let n_liked = rng.gen_range(1..=3.min(cfg.n_topics));
        let mut order: Vec<usize> = (0..cfg.n_topics).collect();
        order.shuffle(&mut rng);
        let liked = &order[..n_liked];
        let mut affinity = vec![0.0; cfg.n_topics];
        for &t in liked {
            affinity[t] = rng.gen_range(LIKED_AFFINITY_MIN..1.0);
        }
        let max = affinity.iter().cloned().fold(0.0, f64::max);
        for a in affinity.iter_mut() {
            *a /= max;
        }
        for (t, a) in affinity.iter_mut().enumerate() {
            if !liked.contains(&t) {
                *a = rng.gen_range(0.0..UNLIKED_AFFINITY_MAX);
            }
        }

        affinities.push(affinity.clone());
        let mut cat1_ids: Vec<String> = Vec::new();
        let mut cat2_ids: Vec<String> = Vec::new();
        let mut tag_ids: Vec<String> = Vec::new();
        for &t in liked {
            let topic = &topics[t];
            if !cat1_ids.contains(&topic.cat1_id) {
                cat1_ids.push(topic.cat1_id.clone());
            }
            if !cat2_ids.contains(&topic.cat2_id) {
                cat2_ids.push(topic.cat2_id.clone());
            }
            if let Some(tag) = topic.tag_ids.first() {
                if !tag_ids.contains(tag) {
                    tag_ids.push(tag.clone());
                }
            }
        }
        profiles.push(UserProfile {
            user_id: user_id.clone(),
            cat1_ids,
            cat2_ids,
            tag_ids,
        });

        let mut times: Vec<i64> = (0..cfg.logs_per_user)
            .map(|_| rng.gen_range(0..SPAN_SECONDS))
            .collect();
        times.sort_unstable();
        // strictly increasing per user
        for i in 1..times.len() {
            if times[i] <= times[i - 1] {
                times[i] = times[i - 1] + 1;
            }
        }
        let topic_weights: Vec<f64> = shown_topics
            .iter()
            .map(|&t| affinity[t] + IMPRESSION_FLOOR)
            .collect();
        for offset in times {
            let t = shown_topics[roulette(&mut rng, &topic_weights)];
            let n = *news_by_topic[t].choose(&mut rng).expect("non-empty topic");
            let rank = roulette(
                &mut rng,
                &behavior_weights(affinity[t], cfg.affinity_sharpness),
            );
            logs.push(BehaviorLog {
                user_id: user_id.clone(),
                timestamp: BASE_TIMESTAMP + offset,
                news_id: news[n].news_id.clone(),
                topic_id: news[n].topic_id.clone(),
                behavior: Behavior::ALL[rank],
            });
        }
    }

    Ok((
        Dataset {
            logs,
            profiles,
            news,
            topics,
        },
        affinities,
    ))
}
