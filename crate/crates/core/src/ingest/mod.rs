//! Raw datasets: behavior logs, user profiles, the news index and the topic
//! index. All four are UTF-8 TSV files with comma-separated id lists.

mod parse;
mod synth;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

pub use parse::{
    parse_behavior_logs, parse_news_index, parse_topic_index, parse_user_profiles,
    read_behavior_logs, read_news_index, read_topic_index, read_user_profiles,
    write_behavior_logs, write_news_index, write_topic_index, write_user_profiles,
};
pub use synth::{generate_synthetic, SynthConfig};

use crate::error::Result;

/// Number of tag slots in a news composition.
pub const TAG_SLOTS: usize = 9;

/// Reserved tag id used to pad news tag lists. It never becomes a graph node
/// and its embedding is the zero vector.
pub const NULL_TAG: &str = "<null>";

pub const BEHAVIOR_LOGS_FILE: &str = "behavior_logs.tsv";
pub const USER_PROFILES_FILE: &str = "user_profiles.tsv";
pub const NEWS_INDEX_FILE: &str = "news_index.tsv";
pub const TOPIC_INDEX_FILE: &str = "topic_index.tsv";

/// User feedback on an impression, ordered from weakest to strongest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Behavior {
    Unclick,
    Click,
    Like,
    Follow,
    Comment,
    Share,
}

impl Behavior {
    pub const ALL: [Behavior; 6] = [
        Behavior::Unclick,
        Behavior::Click,
        Behavior::Like,
        Behavior::Follow,
        Behavior::Comment,
        Behavior::Share,
    ];

    /// 1-based rank: unclick = 1 ... share = 6.
    pub fn rank(self) -> u8 {
        self as u8 + 1
    }

    /// 0-based class index used by the six-way classifier.
    pub fn class_index(self) -> usize {
        self as usize
    }

    pub fn from_class_index(i: usize) -> Option<Behavior> {
        Self::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Behavior::Unclick => "unclick",
            Behavior::Click => "click",
            Behavior::Like => "like",
            Behavior::Follow => "follow",
            Behavior::Comment => "comment",
            Behavior::Share => "share",
        }
    }
}

impl fmt::Display for Behavior {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Behavior {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Self::ALL
            .iter()
            .copied()
            .find(|b| b.as_str() == s)
            .ok_or_else(|| s.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BehaviorLog {
    pub user_id: String,
    pub timestamp: i64,
    pub news_id: String,
    pub topic_id: String,
    pub behavior: Behavior,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UserProfile {
    pub user_id: String,
    pub cat1_ids: Vec<String>,
    pub cat2_ids: Vec<String>,
    pub tag_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NewsRecord {
    pub news_id: String,
    pub topic_id: String,
    pub content: Vec<String>,
    pub cat1_id: String,
    pub cat2_id: String,
    pub poster_id: String,
    /// Always exactly [`TAG_SLOTS`] entries, padded with [`NULL_TAG`].
    pub tag_ids: Vec<String>,
}

impl NewsRecord {
    pub fn real_tags(&self) -> impl Iterator<Item = &str> {
        self.tag_ids
            .iter()
            .map(String::as_str)
            .filter(|t| *t != NULL_TAG)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TopicRecord {
    pub topic_id: String,
    pub title: Vec<String>,
    pub cat1_id: String,
    pub cat2_id: String,
    pub tag_ids: Vec<String>,
}

/// The four datasets together.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Dataset {
    pub logs: Vec<BehaviorLog>,
    pub profiles: Vec<UserProfile>,
    pub news: Vec<NewsRecord>,
    pub topics: Vec<TopicRecord>,
}

impl Dataset {
    pub fn read_dir(dir: &Path) -> Result<Dataset> {
        Ok(Dataset {
            logs: read_behavior_logs(&dir.join(BEHAVIOR_LOGS_FILE))?,
            profiles: read_user_profiles(&dir.join(USER_PROFILES_FILE))?,
            news: read_news_index(&dir.join(NEWS_INDEX_FILE))?,
            topics: read_topic_index(&dir.join(TOPIC_INDEX_FILE))?,
        })
    }

    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(BEHAVIOR_LOGS_FILE), write_behavior_logs(&self.logs))?;
        std::fs::write(dir.join(USER_PROFILES_FILE), write_user_profiles(&self.profiles))?;
        std::fs::write(dir.join(NEWS_INDEX_FILE), write_news_index(&self.news))?;
        std::fs::write(dir.join(TOPIC_INDEX_FILE), write_topic_index(&self.topics))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn behavior_rank_order() {
        let ranks: Vec<u8> = Behavior::ALL.iter().map(|b| b.rank()).collect();
        assert_eq!(ranks, vec![1, 2, 3, 4, 5, 6]);
        assert!(Behavior::Unclick < Behavior::Click);
        assert!(Behavior::Comment < Behavior::Share);
        for b in Behavior::ALL {
            assert_eq!(b.as_str().parse::<Behavior>().unwrap(), b);
        }
    }
}
