//! Balanced test-set sampling.

use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::vec::Vec;

use crate::conversation::Conversation;
use crate::intent::Labels;
use crate::rng::SplitMix64;
use crate::{Error, Result};

/// Greedily picks `target_size` conversations so that each intent's positive
/// rate stays as close to 50% as possible.
///
/// Candidates are visited in a seed-determined shuffled order. At every pick
/// the candidate minimizing the largest per-intent deviation from a 50%
/// positive rate wins; ties go to the smaller summed deviation, then to the
/// earlier candidate in shuffled order. Conversation ids are never repeated
/// (later duplicates in the input are ignored).
///
/// Returns indices into `convs` in pick order.
pub fn balanced_indices(convs: &[Conversation], target_size: usize, seed: u64) -> Result<Vec<usize>> {
    let mut intents = None;
    for c in convs {
        let labels = c.labels.as_ref().ok_or_else(|| Error::UnlabeledConversation(c.id.clone()))?;
        match intents {
            None => intents = Some(labels.len()),
            Some(n) => labels.check_len(n)?,
        }
    }
    let intents = intents.unwrap_or(0);

    let mut rng = SplitMix64::new(seed);
    let order = rng.permutation(convs.len());
    let mut seen_ids = BTreeSet::new();
    // label pattern -> unused candidates in shuffled order, with their rank
    let mut queues: BTreeMap<&Labels, VecDeque<(usize, usize)>> = BTreeMap::new();
    let mut available = 0usize;
    for (rank, &i) in order.iter().enumerate() {
        if !seen_ids.insert(convs[i].id.as_str()) {
            continue;
        }
        let labels = convs[i].labels.as_ref().expect("checked above");
        queues.entry(labels).or_default().push_back((rank, i));
        available += 1;
    }

    let target = target_size.min(available);
    let mut positives = alloc::vec![0i64; intents];
    let mut picked = Vec::with_capacity(target);
    for step in 0..target {
        let size = step as i64 + 1;
        // deviations scaled by 2 * size to stay in integers
        let mut best: Option<((i64, i64, usize), &Labels)> = None;
        for (labels, queue) in &queues {
            let Some(&(rank, _)) = queue.front() else { continue };
            let mut max_dev = 0i64;
            let mut sum_dev = 0i64;
            for k in 0..intents {
                let pos = positives[k] + labels[k] as i64;
                let dev = (2 * pos - size).abs();
                max_dev = max_dev.max(dev);
                sum_dev += dev;
            }
            let key = (max_dev, sum_dev, rank);
            if best.as_ref().is_none_or(|(b, _)| key < *b) {
                best = Some((key, *labels));
            }
        }
        let (_, labels) = best.expect("target never exceeds available candidates");
        let (_, i) = queues.get_mut(labels).and_then(VecDeque::pop_front).expect("non-empty queue");
        for (k, p) in positives.iter_mut().enumerate() {
            *p += labels[k] as i64;
        }
        picked.push(i);
    }
    Ok(picked)
}

pub fn sample_balanced(convs: &[Conversation], target_size: usize, seed: u64) -> Result<Vec<Conversation>> {
    Ok(balanced_indices(convs, target_size, seed)?.into_iter().map(|i| convs[i].clone()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conversation::Turn;
    use alloc::format;
    use alloc::vec;

    fn conv(i: usize, bits: [u8; 2]) -> Conversation {
        let mut c = Conversation::new(format!("c{i}"), "d", vec![Turn::new("s", "x")]);
        c.labels = Labels::from_bits(&bits);
        c
    }

    #[test]
    fn ninety_ten_split_balances_exactly() {
        let convs: Vec<_> = (0..100).map(|i| conv(i, [(i < 90) as u8, 0])).collect();
        let picked = sample_balanced(&convs, 20, 7).unwrap();
        assert_eq!(picked.len(), 20);
        let pos = picked.iter().filter(|c| c.labels.as_ref().unwrap()[0]).count();
        assert_eq!(pos, 10);
    }

    #[test]
    fn full_target_keeps_the_set() {
        let convs: Vec<_> = (0..30).map(|i| conv(i, [(i % 3 == 0) as u8, (i % 2) as u8])).collect();
        let mut idx = balanced_indices(&convs, 30, 1).unwrap();
        idx.sort_unstable();
        assert_eq!(idx, (0..30).collect::<Vec<_>>());
        assert_eq!(balanced_indices(&convs, 100, 1).unwrap().len(), 30);
    }

    #[test]
    fn identical_labels_still_deterministic() {
        let convs: Vec<_> = (0..50).map(|i| conv(i, [1, 1])).collect();
        let a = balanced_indices(&convs, 10, 99).unwrap();
        assert_eq!(a, balanced_indices(&convs, 10, 99).unwrap());
        assert_eq!(a.len(), 10);
    }

    #[test]
    fn duplicate_ids_are_skipped() {
        let mut convs: Vec<_> = (0..10).map(|i| conv(i, [(i % 2) as u8, 0])).collect();
        convs.extend((0..10).map(|i| conv(i, [(i % 2) as u8, 0])));
        let picked = sample_balanced(&convs, 20, 3).unwrap();
        assert_eq!(picked.len(), 10);
        let ids: BTreeSet<_> = picked.iter().map(|c| c.id.clone()).collect();
        assert_eq!(ids.len(), 10);
    }

    #[test]
    fn unlabeled_input_rejected() {
        let mut convs = vec![conv(0, [0, 0])];
        convs[0].labels = None;
        assert!(balanced_indices(&convs, 1, 0).is_err());
    }
}
