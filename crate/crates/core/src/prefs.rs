/// A preference list with ties: an ordered sequence of non-empty tie groups.
///
/// The rank of an entry is one plus the number of entries in strictly
/// earlier groups, so tied entries share a rank.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PrefList<T> {
    items: Vec<T>,
    // Exclusive end offset of each group in `items`.
    ends: Vec<u32>,
}

impl<T> Default for PrefList<T> {
    fn default() -> Self {
        Self {
            items: Vec::new(),
            ends: Vec::new(),
        }
    }
}

impl<T: Copy + Eq> PrefList<T> {
    /// Builds a list from tie groups. Empty groups are dropped.
    pub fn from_groups<I, G>(groups: I) -> Self
    where
        I: IntoIterator<Item = G>,
        G: IntoIterator<Item = T>,
    {
        let mut list = Self::default();
        for group in groups {
            list.push_group(group);
        }
        list
    }

    /// A list without ties.
    pub fn strict<I: IntoIterator<Item = T>>(items: I) -> Self {
        Self::from_groups(items.into_iter().map(|x| [x]))
    }

    /// Appends a tie group after all existing ones. Empty groups are ignored.
    pub fn push_group<G: IntoIterator<Item = T>>(&mut self, group: G) {
        let before = self.items.len();
        self.items.extend(group);
        if self.items.len() > before {
            self.ends.push(self.items.len() as u32);
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn group_count(&self) -> usize {
        self.ends.len()
    }

    /// All entries in preference order, ties in listed order.
    pub fn items(&self) -> &[T] {
        &self.items
    }

    pub fn group(&self, g: usize) -> &[T] {
        let start = if g == 0 { 0 } else { self.ends[g - 1] as usize };
        &self.items[start..self.ends[g] as usize]
    }

    pub fn groups(&self) -> impl Iterator<Item = &[T]> + '_ {
        (0..self.ends.len()).map(move |g| self.group(g))
    }

    /// Entries paired with their rank.
    pub fn ranked(&self) -> impl Iterator<Item = (T, u32)> + '_ {
        let mut start = 0u32;
        self.ends.iter().flat_map(move |&end| {
            let rank = start + 1;
            let range = start as usize..end as usize;
            start = end;
            self.items[range].iter().map(move |&x| (x, rank))
        })
    }

    pub fn rank_of(&self, x: T) -> Option<u32> {
        self.ranked().find(|&(y, _)| y == x).map(|(_, r)| r)
    }

    pub fn contains(&self, x: T) -> bool {
        self.items.contains(&x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranks_count_strictly_better_entries() {
        let list = PrefList::from_groups(vec![vec![4, 7], vec![1], vec![2, 3, 5]]);
        assert_eq!(list.rank_of(4), Some(1));
        assert_eq!(list.rank_of(7), Some(1));
        assert_eq!(list.rank_of(1), Some(3));
        assert_eq!(list.rank_of(5), Some(4));
        assert_eq!(list.rank_of(9), None);
        assert_eq!(list.group_count(), 3);
        assert_eq!(list.group(2), &[2, 3, 5]);
    }

    #[test]
    fn empty_groups_are_dropped() {
        let list = PrefList::from_groups(vec![vec![], vec![1], vec![]]);
        assert_eq!(list.group_count(), 1);
        assert_eq!(list.len(), 1);
    }
}
