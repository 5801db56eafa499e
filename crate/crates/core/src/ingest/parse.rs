use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use super::{Behavior, BehaviorLog, NewsRecord, TopicRecord, UserProfile, NULL_TAG, TAG_SLOTS};
use crate::error::{Error, Result};

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        Lines {
            inner: text.lines().enumerate(),
        }
    }
}

impl<'a> Iterator for Lines<'a> {
    /// (1-based line number, fields)
    type Item = (usize, Vec<&'a str>);

    fn next(&mut self) -> Option<Self::Item> {
        for (i, line) in self.inner.by_ref() {
            if line.trim().is_empty() {
                continue;
            }
            return Some((i + 1, line.split('\t').collect()));
        }
        None
    }
}

fn parse_err(source: &str, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: source.to_string(),
        line,
        msg: msg.into(),
    }
}

fn expect_fields(source: &str, line: usize, fields: &[&str], n: usize) -> Result<()> {
    if fields.len() != n {
        return Err(parse_err(
            source,
            line,
            format!("expected {n} tab-separated fields, found {}", fields.len()),
        ));
    }
    Ok(())
}

fn non_empty(source: &str, line: usize, value: &str, field: &str) -> Result<String> {
    if value.is_empty() {
        return Err(parse_err(source, line, format!("missing field {field}")));
    }
    Ok(value.to_string())
}

fn id_list(source: &str, line: usize, value: &str, field: &str) -> Result<Vec<String>> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for id in value.split(',').filter(|s| !s.is_empty()) {
        if !seen.insert(id) {
            return Err(parse_err(
                source,
                line,
                format!("duplicate id '{id}' in {field}"),
            ));
        }
        out.push(id.to_string());
    }
    Ok(out)
}

fn read(path: &Path) -> Result<String> {
    Ok(std::fs::read_to_string(path)?)
}

pub fn parse_behavior_logs(source: &str, text: &str) -> Result<Vec<BehaviorLog>> {
    let mut out = Vec::new();
    for (line, f) in Lines::new(text) {
        expect_fields(source, line, &f, 5)?;
        let timestamp: i64 = f[1]
            .parse()
            .map_err(|_| parse_err(source, line, format!("bad timestamp '{}'", f[1])))?;
        if timestamp <= 0 {
            return Err(parse_err(source, line, "timestamp must be positive"));
        }
        let behavior = f[4].parse::<Behavior>().map_err(|token| Error::UnknownBehavior {
            token,
            line,
        })?;
        out.push(BehaviorLog {
            user_id: non_empty(source, line, f[0], "user_id")?,
            timestamp,
            news_id: non_empty(source, line, f[2], "news_id")?,
            topic_id: non_empty(source, line, f[3], "topic_id")?,
            behavior,
        });
    }
    Ok(out)
}

pub fn parse_user_profiles(source: &str, text: &str) -> Result<Vec<UserProfile>> {
    let mut out = Vec::new();
    let mut ids = HashSet::new();
    for (line, f) in Lines::new(text) {
        expect_fields(source, line, &f, 4)?;
        let user_id = non_empty(source, line, f[0], "user_id")?;
        if !ids.insert(user_id.clone()) {
            return Err(Error::Duplicate {
                field: "user_id",
                id: user_id,
            });
        }
        out.push(UserProfile {
            user_id,
            cat1_ids: id_list(source, line, f[1], "cat1_ids")?,
            cat2_ids: id_list(source, line, f[2], "cat2_ids")?,
            tag_ids: id_list(source, line, f[3], "tag_ids")?,
        });
    }
    Ok(out)
}

pub fn parse_news_index(source: &str, text: &str) -> Result<Vec<NewsRecord>> {
    let mut out = Vec::new();
    let mut ids = HashSet::new();
    for (line, f) in Lines::new(text) {
        expect_fields(source, line, &f, 7)?;
        let news_id = non_empty(source, line, f[0], "news_id")?;
        if !ids.insert(news_id.clone()) {
            return Err(Error::Duplicate {
                field: "news_id",
                id: news_id,
            });
        }
        let content: Vec<String> = f[2].split_whitespace().map(str::to_string).collect();
        if content.is_empty() {
            return Err(parse_err(source, line, "missing field content"));
        }
        let mut tag_ids = id_list(source, line, f[6], "tag_ids")?;
        if tag_ids.len() > TAG_SLOTS {
            return Err(parse_err(
                source,
                line,
                format!("{} tags exceed the {TAG_SLOTS} tag slots", tag_ids.len()),
            ));
        }
        if tag_ids.iter().any(|t| t == NULL_TAG) {
            return Err(parse_err(source, line, format!("reserved tag id '{NULL_TAG}'")));
        }
        tag_ids.resize(TAG_SLOTS, NULL_TAG.to_string());
        out.push(NewsRecord {
            news_id,
            topic_id: non_empty(source, line, f[1], "topic_id")?,
            content,
            cat1_id: non_empty(source, line, f[3], "cat1_id")?,
            cat2_id: non_empty(source, line, f[4], "cat2_id")?,
            poster_id: non_empty(source, line, f[5], "poster_id")?,
            tag_ids,
        });
    }
    Ok(out)
}

pub fn parse_topic_index(source: &str, text: &str) -> Result<Vec<TopicRecord>> {
    let mut out = Vec::new();
    let mut ids = HashSet::new();
    for (line, f) in Lines::new(text) {
        expect_fields(source, line, &f, 5)?;
        let topic_id = non_empty(source, line, f[0], "topic_id")?;
        if !ids.insert(topic_id.clone()) {
            return Err(Error::Duplicate {
                field: "topic_id",
                id: topic_id,
            });
        }
        out.push(TopicRecord {
            topic_id,
            title: f[1].split_whitespace().map(str::to_string).collect(),
            cat1_id: non_empty(source, line, f[2], "cat1_id")?,
            cat2_id: non_empty(source, line, f[3], "cat2_id")?,
            tag_ids: id_list(source, line, f[4], "tag_ids")?,
        });
    }
    Ok(out)
}

pub fn read_behavior_logs(path: &Path) -> Result<Vec<BehaviorLog>> {
    parse_behavior_logs(&path.display().to_string(), &read(path)?)
}

pub fn read_user_profiles(path: &Path) -> Result<Vec<UserProfile>> {
    parse_user_profiles(&path.display().to_string(), &read(path)?)
}

pub fn read_news_index(path: &Path) -> Result<Vec<NewsRecord>> {
    parse_news_index(&path.display().to_string(), &read(path)?)
}

pub fn read_topic_index(path: &Path) -> Result<Vec<TopicRecord>> {
    parse_topic_index(&path.display().to_string(), &read(path)?)
}

pub fn write_behavior_logs(logs: &[BehaviorLog]) -> String {
    let mut s = String::new();
    for l in logs {
        let _ = writeln!(
            s,
            "{}\t{}\t{}\t{}\t{}",
            l.user_id, l.timestamp, l.news_id, l.topic_id, l.behavior
        );
    }
    s
}

pub fn write_user_profiles(profiles: &[UserProfile]) -> String {
    let mut s = String::new();
    for p in profiles {
        let _ = writeln!(
            s,
            "{}\t{}\t{}\t{}",
            p.user_id,
            p.cat1_ids.join(","),
            p.cat2_ids.join(","),
            p.tag_ids.join(",")
        );
    }
    s
}

pub fn write_news_index(news: &[NewsRecord]) -> String {
    let mut s = String::new();
    for n in news {
        let tags: Vec<&str> = n.real_tags().collect();
        let _ = writeln!(
            s,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            n.news_id,
            n.topic_id,
            n.content.join(" "),
            n.cat1_id,
            n.cat2_id,
            n.poster_id,
            tags.join(",")
        );
    }
    s
}

pub fn write_topic_index(topics: &[TopicRecord]) -> String {
    let mut s = String::new();
    for t in topics {
        let _ = writeln!(
            s,
            "{}\t{}\t{}\t{}\t{}",
            t.topic_id,
            t.title.join(" "),
            t.cat1_id,
            t.cat2_id,
            t.tag_ids.join(",")
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_a_behavior_line() {
        let logs = parse_behavior_logs("logs", "u1\t1529400000\tn42\tt7\tclick\n").unwrap();
        assert_eq!(
            logs,
            vec![BehaviorLog {
                user_id: "u1".into(),
                timestamp: 1529400000,
                news_id: "n42".into(),
                topic_id: "t7".into(),
                behavior: Behavior::Click,
            }]
        );
    }

    #[test]
    fn rejects_unknown_behavior() {
        let err = parse_behavior_logs("logs", "u1\t1529400000\tn42\tt7\tclickk").unwrap_err();
        assert_eq!(err.to_string(), "unknown behavior 'clickk' at line 1");
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let text = "u1\t1\tn1\tt1\tclick\nu2\t2\tn2\n";
        match parse_behavior_logs("logs", text).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            e => panic!("unexpected {e}"),
        }
        assert!(parse_behavior_logs("logs", "u1\t-5\tn1\tt1\tclick").is_err());
    }

    #[test]
    fn empty_file_is_empty() {
        assert!(parse_behavior_logs("logs", "").unwrap().is_empty());
        assert!(parse_news_index("news", "").unwrap().is_empty());
    }

    #[test]
    fn pads_news_tags() {
        let news = parse_news_index("news", "n1\tt1\ta b c\tc1\tc2\tp1\tg1,g2,g3\n").unwrap();
        let tags = &news[0].tag_ids;
        assert_eq!(tags.len(), 9);
        assert_eq!(&tags[..3], &["g1", "g2", "g3"]);
        assert!(tags[3..].iter().all(|t| t == NULL_TAG));

        let nine = (1..=9).map(|i| format!("g{i}")).collect::<Vec<_>>().join(",");
        let news = parse_news_index("news", &format!("n1\tt1\ta\tc1\tc2\tp1\t{nine}")).unwrap();
        let expected: Vec<String> = (1..=9).map(|i| format!("g{i}")).collect();
        assert_eq!(news[0].tag_ids, expected);
    }

    #[test]
    fn duplicate_news_id() {
        let text = "n1\tt1\ta\tc1\tc2\tp1\tg1\nn1\tt1\tb\tc1\tc2\tp1\tg2\n";
        let err = parse_news_index("news", text).unwrap_err();
        assert!(err.to_string().contains("duplicate news_id"));
    }

    #[test]
    fn missing_field() {
        assert!(parse_news_index("news", "n1\tt1\ta\tc1\tc2\tp1").is_err());
        assert!(parse_news_index("news", "n1\t\ta\tc1\tc2\tp1\tg1").is_err());
        assert!(parse_user_profiles("users", "u1\tc1\tc2").is_err());
        assert!(parse_topic_index("topics", "t1\ttitle\tc1\t\tg1").is_err());
    }

    #[test]
    fn duplicate_ids_within_list() {
        assert!(parse_user_profiles("users", "u1\tc1,c1\t\t").is_err());
        let users = parse_user_profiles("users", "u1\t\t\t\n").unwrap();
        assert!(users[0].cat1_ids.is_empty() && users[0].tag_ids.is_empty());
    }
}
