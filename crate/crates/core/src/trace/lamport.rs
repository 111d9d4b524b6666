use std::collections::{BTreeMap, HashMap};

use super::{EventKind, FirstMsgMap, ProcId, ProcessTrace};
use crate::{Error, Result};

/// Stamps every event with a Lamport timestamp.
///
/// Every event ticks the local counter; a send piggybacks the post-tick value;
/// a receive sets the counter to `max(local, piggybacked) + 1`. Existing
/// timestamps on the input are ignored, so stamping is idempotent.
pub fn stamp_lamport(raw: &[ProcessTrace]) -> Result<(Vec<ProcessTrace>, FirstMsgMap)> {
    validate(raw)?;

    let mut sends: HashMap<u64, (ProcId, usize)> = HashMap::new();
    for t in raw {
        for (i, e) in t.events.iter().enumerate() {
            if e.kind == EventKind::Send {
                let id = e.msg_id.ok_or_else(|| {
                    Error::MalformedTrace(format!("send {}:{} has no msg_id", t.process, e.seq))
                })?;
                if sends.insert(id, (t.process, i)).is_some() {
                    return Err(Error::MalformedTrace(format!("msg_id {id} sent twice")));
                }
            }
        }
    }
    let mut received: HashMap<u64, ProcId> = HashMap::new();
    for t in raw {
        for e in t.events.iter().filter(|e| e.kind == EventKind::Recv) {
            let id = e.msg_id.ok_or_else(|| {
                Error::MalformedTrace(format!("recv {}:{} has no msg_id", t.process, e.seq))
            })?;
            let &(sender, _) = sends.get(&id).ok_or_else(|| {
                Error::MalformedTrace(format!(
                    "recv {}:{} references unknown msg_id {id}",
                    t.process, e.seq
                ))
            })?;
            if received.insert(id, t.process).is_some() {
                return Err(Error::MalformedTrace(format!("msg_id {id} received twice")));
            }
            if e.peer.is_some_and(|p| p != sender) {
                return Err(Error::MalformedTrace(format!(
                    "recv {}:{} names peer {:?} but msg_id {id} came from {sender}",
                    t.process, e.seq, e.peer
                )));
            }
        }
    }

    let mut out: Vec<ProcessTrace> = raw.to_vec();
    let mut clocks = vec![0u64; out.len()];
    let mut cursor = vec![0usize; out.len()];
    let mut piggyback: HashMap<u64, u64> = HashMap::new();
    let mut first_msgs = FirstMsgMap::default();

    loop {
        let mut progressed = false;
        let mut done = true;
        for p in 0..out.len() {
            let process = out[p].process;
            while cursor[p] < out[p].events.len() {
                let event = &mut out[p].events[cursor[p]];
                match event.kind {
                    EventKind::Recv => {
                        let id = event.msg_id.expect("validated");
                        let Some(&carried) = piggyback.get(&id) else { break };
                        clocks[p] = clocks[p].max(carried) + 1;
                        event.ts = clocks[p];
                        let sender = sends[&id].0;
                        first_msgs.record(process, sender, event.ts);
                    }
                    EventKind::Send => {
                        clocks[p] += 1;
                        event.ts = clocks[p];
                        piggyback.insert(event.msg_id.expect("validated"), clocks[p]);
                    }
                    _ => {
                        clocks[p] += 1;
                        event.ts = clocks[p];
                    }
                }
                cursor[p] += 1;
                progressed = true;
            }
            done &= cursor[p] == out[p].events.len();
        }
        if done {
            return Ok((out, first_msgs));
        }
        if !progressed {
            let stuck: Vec<String> = out
                .iter()
                .zip(&cursor)
                .filter(|(t, &c)| c < t.events.len())
                .map(|(t, &c)| format!("{}:{}", t.process, t.events[c].seq))
                .collect();
            return Err(Error::Causality(format!(
                "receives wait on each other at {}",
                stuck.join(", ")
            )));
        }
    }
}

fn validate(raw: &[ProcessTrace]) -> Result<()> {
    let mut seen = BTreeMap::new();
    for t in raw {
        if seen.insert(t.process, ()).is_some() {
            return Err(Error::MalformedTrace(format!("process {} listed twice", t.process)));
        }
        let mut prev: Option<u64> = None;
        for e in &t.events {
            if e.method.process != t.process {
                return Err(Error::MalformedTrace(format!(
                    "event {}:{} belongs to process {}",
                    t.process, e.seq, e.method.process
                )));
            }
            if e.method.class_name.is_empty() || e.method.method_name.is_empty() {
                return Err(Error::MalformedTrace(format!(
                    "event {}:{} has an empty method name",
                    t.process, e.seq
                )));
            }
            if prev.is_some_and(|p| p >= e.seq) {
                return Err(Error::MalformedTrace(format!(
                    "process {} sequence numbers not increasing at {}",
                    t.process, e.seq
                )));
            }
            prev = Some(e.seq);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::{EventRecord, MethodId};

    fn ev(p: ProcId, seq: u64, kind: EventKind) -> EventRecord {
        EventRecord::new(kind, MethodId::new(p, "C", "m"), seq)
    }

    /// Three processes as in the classic three-process illustration:
    /// A: a, b(send m1)   B: c(recv m1), d(send m2)   C: e, f(recv m2)
    pub(crate) fn figure() -> Vec<ProcessTrace> {
        vec![
            ProcessTrace::new(
                0,
                vec![ev(0, 1, EventKind::StmtCover), ev(0, 2, EventKind::Send).with_msg(1, 1)],
            ),
            ProcessTrace::new(
                1,
                vec![
                    ev(1, 1, EventKind::Recv).with_msg(1, 0),
                    ev(1, 2, EventKind::Send).with_msg(2, 2),
                ],
            ),
            ProcessTrace::new(
                2,
                vec![ev(2, 1, EventKind::StmtCover), ev(2, 2, EventKind::Recv).with_msg(2, 1)],
            ),
        ]
    }

    #[test]
    fn figure_timestamps() {
        let (stamped, first) = stamp_lamport(&figure()).unwrap();
        let ts: Vec<Vec<u64>> = stamped
            .iter()
            .map(|t| t.events.iter().map(|e| e.ts).collect())
            .collect();
        assert_eq!(ts, vec![vec![1, 2], vec![3, 4], vec![1, 5]]);
        assert_eq!(first.get(1, 0), Some(3));
        assert_eq!(first.get(2, 1), Some(5));
        assert_eq!(first.get(0, 1), None);
    }

    #[test]
    fn single_process_counts_up() {
        let t = ProcessTrace::new(0, (1..=3).map(|s| ev(0, s, EventKind::StmtCover)).collect());
        let (stamped, first) = stamp_lamport(&[t]).unwrap();
        let ts: Vec<u64> = stamped[0].events.iter().map(|e| e.ts).collect();
        assert_eq!(ts, vec![1, 2, 3]);
        assert!(first.is_empty());
    }

    #[test]
    fn restamping_is_idempotent() {
        let (once, f1) = stamp_lamport(&figure()).unwrap();
        let (twice, f2) = stamp_lamport(&once).unwrap();
        assert_eq!(once, twice);
        assert_eq!(f1, f2);
    }

    #[test]
    fn unknown_msg_id_is_malformed() {
        let t = ProcessTrace::new(0, vec![ev(0, 1, EventKind::Recv).with_msg(9, 1)]);
        assert!(matches!(stamp_lamport(&[t]), Err(Error::MalformedTrace(_))));
    }

    #[test]
    fn cyclic_receives_are_a_causality_error() {
        let traces = vec![
            ProcessTrace::new(
                0,
                vec![ev(0, 1, EventKind::Recv).with_msg(2, 1), ev(0, 2, EventKind::Send).with_msg(1, 1)],
            ),
            ProcessTrace::new(
                1,
                vec![ev(1, 1, EventKind::Recv).with_msg(1, 0), ev(1, 2, EventKind::Send).with_msg(2, 0)],
            ),
        ];
        assert!(matches!(stamp_lamport(&traces), Err(Error::Causality(_))));
    }

    #[test]
    fn non_increasing_seq_is_malformed() {
        let t = ProcessTrace::new(0, vec![ev(0, 2, EventKind::Entry), ev(0, 2, EventKind::Entry)]);
        assert!(matches!(stamp_lamport(&[t]), Err(Error::MalformedTrace(_))));
    }
}
