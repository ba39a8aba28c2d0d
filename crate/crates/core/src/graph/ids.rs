use std::cmp::Ordering;
use std::collections::HashMap;

/// Bidirectional external-ID ↔ dense-index map for one domain.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct IdMap {
    users: Vec<String>,
    items: Vec<String>,
    user_lookup: HashMap<String, u32>,
    item_lookup: HashMap<String, u32>,
}

/// Integers order numerically and before non-integers; the rest lexically.
pub fn id_order(a: &str, b: &str) -> Ordering {
    match (a.parse::<u64>(), b.parse::<u64>()) {
        (Ok(x), Ok(y)) => x.cmp(&y).then_with(|| a.cmp(b)),
        (Ok(_), Err(_)) => Ordering::Less,
        (Err(_), Ok(_)) => Ordering::Greater,
        (Err(_), Err(_)) => a.cmp(b),
    }
}

fn sorted<'a>(ids: impl IntoIterator<Item = &'a str>) -> Vec<String> {
    let mut v: Vec<String> = ids.into_iter().map(str::to_owned).collect();
    v.sort_by(|a, b| id_order(a, b));
    v.dedup();
    v
}

fn lookup(names: &[String]) -> HashMap<String, u32> {
    names.iter().enumerate().map(|(k, s)| (s.clone(), k as u32)).collect()
}

impl IdMap {
    /// Indices are assigned in [`id_order`].
    pub fn from_ids<'a>(
        users: impl IntoIterator<Item = &'a str>,
        items: impl IntoIterator<Item = &'a str>,
    ) -> Self {
        Self::from_ordered(sorted(users), sorted(items))
    }

    /// Keeps the given order; names must be unique.
    pub fn from_ordered(users: Vec<String>, items: Vec<String>) -> Self {
        let user_lookup = lookup(&users);
        let item_lookup = lookup(&items);
        assert_eq!(user_lookup.len(), users.len(), "duplicate user ID");
        assert_eq!(item_lookup.len(), items.len(), "duplicate item ID");
        IdMap { users, items, user_lookup, item_lookup }
    }

    /// Identity naming `0..num_users`, `0..num_items`.
    pub fn dense(num_users: usize, num_items: usize) -> Self {
        Self::from_ordered(
            (0..num_users).map(|u| u.to_string()).collect(),
            (0..num_items).map(|i| i.to_string()).collect(),
        )
    }

    pub fn num_users(&self) -> usize {
        self.users.len()
    }

    pub fn num_items(&self) -> usize {
        self.items.len()
    }

    pub fn user_index(&self, id: &str) -> Option<u32> {
        self.user_lookup.get(id).copied()
    }

    pub fn item_index(&self, id: &str) -> Option<u32> {
        self.item_lookup.get(id).copied()
    }

    pub fn user_name(&self, u: u32) -> &str {
        &self.users[u as usize]
    }

    pub fn item_name(&self, i: u32) -> &str {
        &self.items[i as usize]
    }

    pub fn user_names(&self) -> &[String] {
        &self.users
    }

    pub fn item_names(&self) -> &[String] {
        &self.items
    }

    /// Map for a filtered graph whose node `k` was node `kept[k]` here.
    pub fn restrict(&self, kept_users: &[u32], kept_items: &[u32]) -> IdMap {
        IdMap::from_ordered(
            kept_users.iter().map(|&u| self.users[u as usize].clone()).collect(),
            kept_items.iter().map(|&i| self.items[i as usize].clone()).collect(),
        )
    }
}

/// Users present in both domains, as `(source index, target index)` pairs
/// sorted by source index.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CommonUserAlignment {
    pub pairs: Vec<(u32, u32)>,
}

impl CommonUserAlignment {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Source index for each target user, if aligned.
    pub fn source_of_target(&self, num_target_users: usize) -> Vec<Option<u32>> {
        let mut out = vec![None; num_target_users];
        for &(s, t) in &self.pairs {
            out[t as usize] = Some(s);
        }
        out
    }
}

/// Intersection of the two user ID sets by exact string equality.
pub fn align_common_users(source: &IdMap, target: &IdMap) -> CommonUserAlignment {
    let pairs = source
        .user_names()
        .iter()
        .enumerate()
        .filter_map(|(s, name)| target.user_index(name).map(|t| (s as u32, t)))
        .collect();
    CommonUserAlignment { pairs }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bijective_and_contiguous() {
        let m = IdMap::from_ids(["b", "a", "c", "a"], ["7", "10"]);
        assert_eq!(m.num_users(), 3);
        for (k, name) in m.user_names().iter().enumerate() {
            assert_eq!(m.user_index(name), Some(k as u32));
        }
        assert_eq!(m.item_name(0), "7");
        assert_eq!(m.item_index("missing"), None);
    }

    #[test]
    fn restrict_renumbers() {
        let m = IdMap::dense(4, 2);
        let r = m.restrict(&[1, 3], &[1]);
        assert_eq!(r.user_index("3"), Some(1));
        assert_eq!(r.item_name(0), "1");
    }

    #[test]
    fn alignment_by_name() {
        let s = IdMap::from_ids(["a", "b", "c"], ["x"]);
        let t = IdMap::from_ids(["c", "a", "z"], ["y"]);
        let al = align_common_users(&s, &t);
        // source a=0,c=2; target a=0,c=1
        assert_eq!(al.pairs, vec![(0, 0), (2, 1)]);
        assert!(align_common_users(&s, &IdMap::from_ids(["q"], ["y"])).is_empty());
        assert_eq!(align_common_users(&s, &s).len(), 3);
    }
}
