//! robots.txt rules for a single user agent.
//!
//! Follows the robots exclusion protocol: records are grouped by
//! `User-agent`, the groups naming our product token are merged (falling
//! back to `*`), `*` and `$` wildcards are honoured, and the longest
//! matching rule wins with `Allow` winning ties.

#[derive(Debug, Clone, PartialEq)]
struct Rule {
    allow: bool,
    pattern: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobotsRules {
    rules: Vec<Rule>,
    /// `Crawl-delay` in seconds, if the matched group set one.
    pub crawl_delay: Option<f64>,
}

#[derive(Default)]
struct Group {
    agents: Vec<String>,
    rules: Vec<Rule>,
    crawl_delay: Option<f64>,
}

/// Product token of a user agent string, e.g. `crowdmine` for
/// `crowdmine/0.1 (+https://example.org)`.
pub fn product_token(user_agent: &str) -> String {
    user_agent
        .split(|c: char| c == '/' || c.is_whitespace())
        .next()
        .unwrap_or("")
        .to_ascii_lowercase()
}

impl RobotsRules {
    pub fn allow_all() -> Self {
        RobotsRules {
            rules: Vec::new(),
            crawl_delay: None,
        }
    }

    pub fn disallow_all() -> Self {
        RobotsRules {
            rules: vec![Rule {
                allow: false,
                pattern: "/".into(),
            }],
            crawl_delay: None,
        }
    }

    pub fn parse(text: &str, user_agent: &str) -> Self {
        let token = product_token(user_agent);
        let mut groups: Vec<Group> = Vec::new();
        let mut current = Group::default();
        let mut in_rules = false;
        for line in text.lines() {
            let line = line.split('#').next().unwrap_or("").trim();
            let Some((key, value)) = line.split_once(':') else {
                continue;
            };
            let key = key.trim().to_ascii_lowercase();
            let value = value.trim();
            match key.as_str() {
                "user-agent" => {
                    if in_rules {
                        groups.push(std::mem::take(&mut current));
                        in_rules = false;
                    }
                    current.agents.push(value.to_ascii_lowercase());
                }
                "allow" | "disallow" => {
                    in_rules = true;
                    if value.is_empty() {
                        continue;
                    }
                    current.rules.push(Rule {
                        allow: key == "allow",
                        pattern: value.to_string(),
                    });
                }
                "crawl-delay" => {
                    in_rules = true;
                    current.crawl_delay = value.parse().ok().filter(|d: &f64| d.is_finite() && *d >= 0.0);
                }
                _ => {}
            }
        }
        if !current.agents.is_empty() {
            groups.push(current);
        }

        let named: Vec<&Group> = groups
            .iter()
            .filter(|g| g.agents.iter().any(|a| a != "*" && !a.is_empty() && token.starts_with(a.as_str())))
            .collect();
        let chosen: Vec<&Group> = if named.is_empty() {
            groups.iter().filter(|g| g.agents.iter().any(|a| a == "*")).collect()
        } else {
            named
        };
        RobotsRules {
            rules: chosen.iter().flat_map(|g| g.rules.iter().cloned()).collect(),
            crawl_delay: chosen.iter().filter_map(|g| g.crawl_delay).reduce(f64::max),
        }
    }

    /// Whether `path` (path plus optional query) may be fetched.
    pub fn is_allowed(&self, path: &str) -> bool {
        if path == "/robots.txt" {
            return true;
        }
        let mut best: Option<(usize, bool)> = None;
        for rule in &self.rules {
            if !pattern_matches(&rule.pattern, path) {
                continue;
            }
            let len = rule.pattern.len();
            best = match best {
                Some((l, a)) if l > len || (l == len && a) => Some((l, a)),
                _ => Some((len, rule.allow)),
            };
        }
        best.is_none_or(|(_, allow)| allow)
    }
}

/// Prefix match with `*` (any run) and a trailing `$` (end anchor).
fn pattern_matches(pattern: &str, path: &str) -> bool {
    let (pattern, anchored) = match pattern.strip_suffix('$') {
        Some(p) => (p, true),
        None => (pattern, false),
    };
    let p = pattern.as_bytes();
    let s = path.as_bytes();
    // reachable[j]: pattern prefix consumed so far can end at s[..j]
    let mut reachable = vec![false; s.len() + 1];
    reachable[0] = true;
    for &pc in p {
        let mut next = vec![false; s.len() + 1];
        if pc == b'*' {
            let mut any = false;
            for j in 0..=s.len() {
                any |= reachable[j];
                next[j] = any;
            }
        } else {
            for j in 0..s.len() {
                if reachable[j] && s[j] == pc {
                    next[j + 1] = true;
                }
            }
        }
        reachable = next;
    }
    if anchored {
        reachable[s.len()]
    } else {
        reachable.iter().any(|&r| r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const ROBOTS: &str = "\
# comment
User-agent: *
Disallow: /private/
Allow: /private/open
Crawl-delay: 3

User-agent: crowdmine
User-agent: otherbot
Disallow: /nocrowd
Allow: /nocrowd/yes$
";

    #[test]
    fn star_group() {
        let r = RobotsRules::parse(ROBOTS, "somebot/1.0");
        assert!(!r.is_allowed("/private/x"));
        assert!(r.is_allowed("/private/open/page"));
        assert!(r.is_allowed("/nocrowd"));
        assert_eq!(r.crawl_delay, Some(3.0));
    }

    #[test]
    fn named_group_replaces_star() {
        let r = RobotsRules::parse(ROBOTS, "crowdmine/0.1 (+https://example.org/bot)");
        assert!(r.is_allowed("/private/x"));
        assert!(!r.is_allowed("/nocrowd/page"));
        assert!(r.is_allowed("/nocrowd/yes"));
        assert!(!r.is_allowed("/nocrowd/yes/more"));
        assert_eq!(r.crawl_delay, None);
    }

    #[test]
    fn wildcards_and_ties() {
        let r = RobotsRules::parse("User-agent: *\nDisallow: /*.pdf$\nDisallow: /a\nAllow: /a\n", "x");
        assert!(!r.is_allowed("/docs/file.pdf"));
        assert!(r.is_allowed("/docs/file.pdf?x=1"));
        assert!(r.is_allowed("/a/b"));
    }

    #[test]
    fn empty_disallow_allows_everything() {
        let r = RobotsRules::parse("User-agent: *\nDisallow:\n", "x");
        assert!(r.is_allowed("/anything"));
    }

    #[test]
    fn disallow_all_still_allows_robots_file() {
        let r = RobotsRules::disallow_all();
        assert!(!r.is_allowed("/"));
        assert!(r.is_allowed("/robots.txt"));
    }

    #[test]
    fn patterns() {
        assert!(pattern_matches("/a*b", "/a/x/b/c"));
        assert!(!pattern_matches("/a*b$", "/a/x/b/c"));
        assert!(pattern_matches("*", ""));
        assert!(!pattern_matches("/x", "/"));
    }
}
