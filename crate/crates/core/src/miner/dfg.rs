use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;

use super::MinerError;
use crate::eventlog::EventLog;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct DirectlyFollowsGraph {
    pub activities: BTreeSet<String>,
    /// `(a, b)` -> number of times `b` directly follows `a` in some trace.
    #[serde(serialize_with = "edges_as_list")]
    pub edges: BTreeMap<(String, String), u64>,
    pub start: BTreeMap<String, u64>,
    pub end: BTreeMap<String, u64>,
    pub trace_count: u64,
}

fn edges_as_list<S: serde::Serializer>(edges: &BTreeMap<(String, String), u64>, s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(edges.iter().map(|((a, b), n)| (a, b, n)))
}

impl DirectlyFollowsGraph {
    pub fn follows(&self, a: &str, b: &str) -> bool {
        self.edges.contains_key(&(a.to_string(), b.to_string()))
    }
}

pub fn mine_dfg_from_traces<S: AsRef<str>>(traces: &[Vec<S>]) -> Result<DirectlyFollowsGraph, MinerError> {
    let mut g = DirectlyFollowsGraph::default();
    for t in traces.iter().filter(|t| !t.is_empty()) {
        g.trace_count += 1;
        for a in t {
            g.activities.insert(a.as_ref().to_string());
        }
        *g.start.entry(t[0].as_ref().to_string()).or_insert(0) += 1;
        *g.end.entry(t[t.len() - 1].as_ref().to_string()).or_insert(0) += 1;
        for w in t.windows(2) {
            *g.edges
                .entry((w[0].as_ref().to_string(), w[1].as_ref().to_string()))
                .or_insert(0) += 1;
        }
    }
    if g.trace_count == 0 {
        return Err(MinerError::EmptyLog);
    }
    Ok(g)
}

/// Directly-follows graph over the case traces (the orphan trace is not a process instance).
pub fn mine_dfg(el: &EventLog) -> Result<DirectlyFollowsGraph, MinerError> {
    let traces: Vec<Vec<&str>> = el.activity_traces().collect();
    mine_dfg_from_traces(&traces)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Relation {
    /// `a -> b`
    Causal,
    /// `a <- b`
    Reverse,
    Parallel,
    Choice,
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Relation::Causal => "->",
            Relation::Reverse => "<-",
            Relation::Parallel => "||",
            Relation::Choice => "#",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FootprintMatrix {
    pub activities: Vec<String>,
    pub relations: Vec<Vec<Relation>>,
}

impl FootprintMatrix {
    pub fn index(&self, a: &str) -> Option<usize> {
        self.activities.binary_search_by(|x| x.as_str().cmp(a)).ok()
    }

    pub fn relation(&self, a: &str, b: &str) -> Option<Relation> {
        Some(self.relations[self.index(a)?][self.index(b)?])
    }
}

pub fn compute_footprint(g: &DirectlyFollowsGraph) -> FootprintMatrix {
    let activities: Vec<String> = g.activities.iter().cloned().collect();
    let relations = activities
        .iter()
        .map(|a| {
            activities
                .iter()
                .map(|b| match (g.follows(a, b), g.follows(b, a)) {
                    (true, false) => Relation::Causal,
                    (false, true) => Relation::Reverse,
                    (true, true) => Relation::Parallel,
                    (false, false) => Relation::Choice,
                })
                .collect()
        })
        .collect();
    FootprintMatrix { activities, relations }
}
