#![allow(dead_code)]

use std::collections::BTreeSet;

use evoro::morphology::{BodyPlan, Face, ModuleKind};

/// Position, kind and parent position of every module: identifies a body
/// independently of placement order.
type ModuleKey = (i32, i32, u8, Option<(i32, i32)>);

fn key(b: &BodyPlan) -> Vec<ModuleKey> {
    let mods = b.modules();
    let mut k: Vec<_> = mods
        .iter()
        .map(|m| {
            let kind = match m.kind {
                ModuleKind::Core => 0,
                ModuleKind::Brick => 1,
                ModuleKind::ActiveHinge => 2,
            };
            let parent = m.parent.map(|p| (mods[p].grid_pos.x, mods[p].grid_pos.y));
            (m.grid_pos.x, m.grid_pos.y, kind, parent)
        })
        .collect();
    k.sort();
    k
}

/// Every distinct connected body with at most `max` modules.
pub fn enumerate_bodies(max: usize) -> Vec<BodyPlan> {
    let mut out = vec![BodyPlan::core_only()];
    let mut frontier = vec![BodyPlan::core_only()];
    for _ in 1..max {
        let mut seen = BTreeSet::new();
        let mut next = Vec::new();
        for b in &frontier {
            for p in 0..b.len() {
                for f in Face::ALL {
                    for kind in [ModuleKind::Brick, ModuleKind::ActiveHinge] {
                        let mut c = b.clone();
                        if c.attach(p, f, kind).is_some() && seen.insert(key(&c)) {
                            next.push(c);
                        }
                    }
                }
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

/// Limb ceiling for bodies of 1..=15 modules, worked out by hand.
pub const LIMB_CEILING: [usize; 15] = [0, 1, 2, 3, 4, 4, 5, 6, 6, 7, 8, 8, 9, 10, 10];

/// Descriptors recomputed from grid positions and parent links alone.
pub fn oracle_descriptors(b: &BodyPlan) -> [f64; 6] {
    let mods = b.modules();
    let xs: Vec<i32> = mods.iter().map(|m| m.grid_pos.x).collect();
    let ys: Vec<i32> = mods.iter().map(|m| m.grid_pos.y).collect();
    let width = (xs.iter().max().unwrap() - xs.iter().min().unwrap() + 1) as f64;
    let length = (ys.iter().max().unwrap() - ys.iter().min().unwrap() + 1) as f64;
    let parents: BTreeSet<usize> = mods.iter().filter_map(|m| m.parent).collect();
    let limbs = (1..mods.len()).filter(|i| !parents.contains(i)).count();
    let ceiling = LIMB_CEILING[mods.len() - 1];
    let count = |k: ModuleKind| mods.iter().filter(|m| m.kind == k).count() as f64;
    [
        mods.len() as f64,
        width,
        width.min(length) / width.max(length),
        count(ModuleKind::Brick),
        if ceiling == 0 {
            0.0
        } else {
            limbs as f64 / ceiling as f64
        },
        count(ModuleKind::ActiveHinge),
    ]
}
