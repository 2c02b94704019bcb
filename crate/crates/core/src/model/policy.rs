//! Endorsement policy expressions.
//!
//! Policies are boolean trees over organization leaves, written in the usual
//! Fabric style: `And(Org1, Or(Org2, Org3))`, `OutOf(2, Org1, Org2, Org3)`,
//! `Majority(Org1, Org2, Org3)`.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndorsementPolicy {
    And(Vec<EndorsementPolicy>),
    Or(Vec<EndorsementPolicy>),
    OutOf(usize, Vec<EndorsementPolicy>),
    Majority(Vec<EndorsementPolicy>),
    Org(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PolicyError {
    #[error("policy parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },
    #[error("OutOf threshold {k} outside 1..={n}")]
    BadThreshold { k: usize, n: usize },
    #[error("{0} node has no children")]
    Empty(&'static str),
}

impl EndorsementPolicy {
    /// Checks the structural invariants: non-empty children and `1 <= k <= n` for `OutOf`.
    pub fn validate(&self) -> Result<(), PolicyError> {
        match self {
            EndorsementPolicy::Org(_) => Ok(()),
            EndorsementPolicy::And(c) => check_children("And", c),
            EndorsementPolicy::Or(c) => check_children("Or", c),
            EndorsementPolicy::Majority(c) => check_children("Majority", c),
            EndorsementPolicy::OutOf(k, c) => {
                check_children("OutOf", c)?;
                if *k == 0 || *k > c.len() {
                    return Err(PolicyError::BadThreshold { k: *k, n: c.len() });
                }
                Ok(())
            }
        }
    }

    /// Structural satisfaction by a set of endorsing organizations.
    pub fn evaluate<S: AsRef<str> + Ord>(&self, orgs: &BTreeSet<S>) -> bool {
        let has = |org: &str| orgs.iter().any(|o| o.as_ref() == org);
        self.eval_with(&has)
    }

    fn eval_with(&self, has: &dyn Fn(&str) -> bool) -> bool {
        match self {
            EndorsementPolicy::Org(org) => has(org),
            EndorsementPolicy::And(c) => c.iter().all(|p| p.eval_with(has)),
            EndorsementPolicy::Or(c) => c.iter().any(|p| p.eval_with(has)),
            EndorsementPolicy::OutOf(k, c) => c.iter().filter(|p| p.eval_with(has)).count() >= *k,
            EndorsementPolicy::Majority(c) => {
                c.iter().filter(|p| p.eval_with(has)).count() > c.len() / 2
            }
        }
    }

    /// All organizations named anywhere in the tree.
    pub fn orgs(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_orgs(&mut out);
        out
    }

    fn collect_orgs(&self, out: &mut BTreeSet<String>) {
        match self {
            EndorsementPolicy::Org(o) => {
                out.insert(o.clone());
            }
            EndorsementPolicy::And(c)
            | EndorsementPolicy::Or(c)
            | EndorsementPolicy::OutOf(_, c)
            | EndorsementPolicy::Majority(c) => c.iter().for_each(|p| p.collect_orgs(out)),
        }
    }

    /// Smallest satisfying org set, choosing orgs in the given preference order.
    ///
    /// Greedy: children are satisfied in the order of their most-preferred org.
    pub fn minimal_endorsers(&self, preference: &[String]) -> Option<BTreeSet<String>> {
        let rank = |org: &str| preference.iter().position(|p| p == org).unwrap_or(usize::MAX);
        self.pick(&rank)
    }

    fn best_rank(&self, rank: &dyn Fn(&str) -> usize) -> usize {
        match self {
            EndorsementPolicy::Org(o) => rank(o),
            EndorsementPolicy::And(c) => c.iter().map(|p| p.best_rank(rank)).max().unwrap_or(usize::MAX),
            EndorsementPolicy::Or(c)
            | EndorsementPolicy::OutOf(_, c)
            | EndorsementPolicy::Majority(c) => {
                c.iter().map(|p| p.best_rank(rank)).min().unwrap_or(usize::MAX)
            }
        }
    }

    fn pick(&self, rank: &dyn Fn(&str) -> usize) -> Option<BTreeSet<String>> {
        let choose = |children: &[EndorsementPolicy], k: usize| -> Option<BTreeSet<String>> {
            let mut order: Vec<&EndorsementPolicy> = children.iter().collect();
            order.sort_by_key(|p| p.best_rank(rank));
            let mut out = BTreeSet::new();
            let mut got = 0;
            for child in order {
                if got == k {
                    break;
                }
                if let Some(set) = child.pick(rank) {
                    out.extend(set);
                    got += 1;
                }
            }
            (got == k).then_some(out)
        };
        match self {
            EndorsementPolicy::Org(o) => (rank(o) != usize::MAX).then(|| BTreeSet::from([o.clone()])),
            EndorsementPolicy::And(c) => choose(c, c.len()),
            EndorsementPolicy::Or(c) => choose(c, 1),
            EndorsementPolicy::OutOf(k, c) => choose(c, *k),
            EndorsementPolicy::Majority(c) => choose(c, c.len() / 2 + 1),
        }
    }

    /// One of the four reference policies over `Org1..=OrgN`.
    ///
    /// P1 `And(Org1, Or(Org2..OrgN))`, P2 `And(Or(first half), Or(second half))`,
    /// P3 `Majority(all)`, P4 `OutOf(2, all)`.
    pub fn preset(name: &str, n_orgs: usize) -> Option<EndorsementPolicy> {
        let n = n_orgs.max(2);
        let org = |i: usize| EndorsementPolicy::Org(format!("Org{i}"));
        let all: Vec<_> = (1..=n).map(org).collect();
        let policy = match name.to_ascii_uppercase().as_str() {
            "P1" => EndorsementPolicy::And(vec![org(1), EndorsementPolicy::Or((2..=n).map(org).collect())]),
            "P2" => {
                let half = n / 2;
                EndorsementPolicy::And(vec![
                    EndorsementPolicy::Or((1..=half).map(org).collect()),
                    EndorsementPolicy::Or((half + 1..=n).map(org).collect()),
                ])
            }
            "P3" => EndorsementPolicy::Majority(all),
            "P4" => EndorsementPolicy::OutOf(2, all),
            _ => return None,
        };
        Some(policy)
    }
}

fn check_children(kind: &'static str, children: &[EndorsementPolicy]) -> Result<(), PolicyError> {
    if children.is_empty() {
        return Err(PolicyError::Empty(kind));
    }
    children.iter().try_for_each(EndorsementPolicy::validate)
}

impl fmt::Display for EndorsementPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let list = |f: &mut fmt::Formatter<'_>, c: &[EndorsementPolicy]| -> fmt::Result {
            for (i, p) in c.iter().enumerate() {
                if i > 0 {
                    f.write_str(",")?;
                }
                write!(f, "{p}")?;
            }
            Ok(())
        };
        match self {
            EndorsementPolicy::Org(o) => f.write_str(o),
            EndorsementPolicy::And(c) => {
                f.write_str("And(")?;
                list(f, c)?;
                f.write_str(")")
            }
            EndorsementPolicy::Or(c) => {
                f.write_str("Or(")?;
                list(f, c)?;
                f.write_str(")")
            }
            EndorsementPolicy::Majority(c) => {
                f.write_str("Majority(")?;
                list(f, c)?;
                f.write_str(")")
            }
            EndorsementPolicy::OutOf(k, c) => {
                write!(f, "OutOf({k},")?;
                list(f, c)?;
                f.write_str(")")
            }
        }
    }
}

impl FromStr for EndorsementPolicy {
    type Err = PolicyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut p = Parser { src: s, pos: 0 };
        let policy = p.expr()?;
        p.skip_ws();
        if p.pos != s.len() {
            return Err(p.err("trailing input"));
        }
        policy.validate()?;
        Ok(policy)
    }
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl Parser<'_> {
    fn err(&self, msg: &str) -> PolicyError {
        PolicyError::Parse {
            pos: self.pos,
            msg: msg.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while self.src[self.pos..].starts_with(char::is_whitespace) {
            self.pos += 1;
        }
    }

    fn ident(&mut self) -> Result<&str, PolicyError> {
        self.skip_ws();
        let start = self.pos;
        let rest = &self.src[start..];
        let len = rest
            .find(|c: char| !(c.is_alphanumeric() || c == '_' || c == '.' || c == '-'))
            .unwrap_or(rest.len());
        if len == 0 {
            return Err(self.err("expected identifier"));
        }
        self.pos += len;
        Ok(&self.src[start..start + len])
    }

    fn eat(&mut self, c: char) -> bool {
        self.skip_ws();
        if self.src[self.pos..].starts_with(c) {
            self.pos += c.len_utf8();
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<EndorsementPolicy, PolicyError> {
        let name = self.ident()?.to_string();
        if !self.eat('(') {
            return Ok(EndorsementPolicy::Org(name));
        }
        let kind = name.to_ascii_lowercase();
        let mut threshold = None;
        if kind == "outof" {
            let k = self.ident()?;
            threshold = Some(k.parse::<usize>().map_err(|_| self.err("OutOf expects a count"))?);
            if !self.eat(',') {
                return Err(self.err("expected `,` after OutOf count"));
            }
        }
        let mut children = vec![self.expr()?];
        while self.eat(',') {
            children.push(self.expr()?);
        }
        if !self.eat(')') {
            return Err(self.err("expected `)`"));
        }
        Ok(match kind.as_str() {
            "and" => EndorsementPolicy::And(children),
            "or" => EndorsementPolicy::Or(children),
            "majority" => EndorsementPolicy::Majority(children),
            "outof" => EndorsementPolicy::OutOf(threshold.unwrap_or(1), children),
            _ => return Err(self.err("unknown policy operator")),
        })
    }
}
