//! Brute-force metric definitions over small abstract partitions, written
//! without reference to the library's implementation.

use std::collections::BTreeSet;

pub type Partition = Vec<Vec<usize>>;

/// All set partitions of `items`, via restricted growth strings.
pub fn partitions_of(items: &[usize]) -> Vec<Partition> {
    fn rec(items: &[usize], i: usize, blocks: &mut Vec<Vec<usize>>, out: &mut Vec<Partition>) {
        if i == items.len() {
            out.push(blocks.clone());
            return;
        }
        for b in 0..blocks.len() {
            blocks[b].push(items[i]);
            rec(items, i + 1, blocks, out);
            blocks[b].pop();
        }
        blocks.push(vec![items[i]]);
        rec(items, i + 1, blocks, out);
        blocks.pop();
    }
    let mut out = Vec::new();
    rec(items, 0, &mut Vec::new(), &mut out);
    out
}

/// Partitions of every subset of `0..n`.
pub fn partitions_of_subsets(n: usize) -> Vec<Partition> {
    let mut out = Vec::new();
    for mask in 0u32..(1 << n) {
        let items: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        out.extend(partitions_of(&items));
    }
    out
}

fn block_of(p: &Partition, m: usize) -> Option<BTreeSet<usize>> {
    p.iter().find(|b| b.contains(&m)).map(|b| b.iter().copied().collect())
}

fn div(n: f64, d: f64) -> f64 {
    if d == 0.0 {
        0.0
    } else {
        n / d
    }
}

fn f1(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// (precision, recall, f1)
pub type Triple = (f64, f64, f64);

fn muc_recall(key: &Partition, resp: &Partition) -> (f64, f64) {
    let mut num = 0.0;
    let mut den = 0.0;
    for k in key {
        // Each mention falls in a response block or is a part of its own.
        let mut parts: BTreeSet<Vec<usize>> = BTreeSet::new();
        for &m in k {
            match block_of(resp, m) {
                Some(b) => parts.insert(b.into_iter().collect()),
                None => parts.insert(vec![usize::MAX - m]),
            };
        }
        num += (k.len() - parts.len()) as f64;
        den += (k.len() - 1) as f64;
    }
    (num, den)
}

pub fn muc(key: &Partition, resp: &Partition) -> Triple {
    let (rn, rd) = muc_recall(key, resp);
    let (pn, pd) = muc_recall(resp, key);
    let (p, r) = (div(pn, pd), div(rn, rd));
    (p, r, f1(p, r))
}

fn b3_recall(key: &Partition, resp: &Partition) -> (f64, f64) {
    let mut num = 0.0;
    let mut n = 0.0;
    for k in key {
        let ks: BTreeSet<usize> = k.iter().copied().collect();
        for &m in k {
            let rs = block_of(resp, m).unwrap_or_else(|| BTreeSet::from([m]));
            num += ks.intersection(&rs).count() as f64 / ks.len() as f64;
            n += 1.0;
        }
    }
    (num, n)
}

pub fn b3(key: &Partition, resp: &Partition) -> Triple {
    let (rn, rd) = b3_recall(key, resp);
    let (pn, pd) = b3_recall(resp, key);
    let (p, r) = (div(pn, pd), div(rn, rd));
    (p, r, f1(p, r))
}

fn phi4(a: &[usize], b: &[usize]) -> f64 {
    let common = a.iter().filter(|m| b.contains(m)).count();
    2.0 * common as f64 / (a.len() + b.len()) as f64
}

/// Best total similarity over all partial one-to-one alignments, by
/// exhaustive search over which response blocks are still free.
fn best_alignment(key: &Partition, resp: &Partition) -> f64 {
    fn go(i: usize, used: u32, key: &Partition, resp: &Partition) -> f64 {
        if i == key.len() {
            return 0.0;
        }
        let mut best = go(i + 1, used, key, resp);
        for j in 0..resp.len() {
            if used & (1 << j) == 0 {
                best = best.max(phi4(&key[i], &resp[j]) + go(i + 1, used | (1 << j), key, resp));
            }
        }
        best
    }
    go(0, 0, key, resp)
}

pub fn ceaf_phi4(key: &Partition, resp: &Partition) -> Triple {
    let sim = best_alignment(key, resp);
    let (p, r) = (div(sim, resp.len() as f64), div(sim, key.len() as f64));
    (p, r, f1(p, r))
}
