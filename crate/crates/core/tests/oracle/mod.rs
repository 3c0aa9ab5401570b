//! Independent reference implementations used by the integration and
//! acceptance tests. Nothing here calls into `mtss_core`.

#![allow(dead_code)]

pub mod bleu;
pub mod kn;
pub mod synthetic;

/// O(n²) count of pairs `i < j` with `p[i] > p[j]`.
pub fn brute_force_inversions(p: &[usize]) -> u64 {
    let mut n = 0;
    for i in 0..p.len() {
        for j in i + 1..p.len() {
            if p[i] > p[j] {
                n += 1;
            }
        }
    }
    n
}
