//! Seeded random instances and the named benchmark families.

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ids::{LecturerId, ProjectId, StudentId};
use crate::instance::Instance;
use crate::prefs::PrefList;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GenError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenParams {
    pub n1: usize,
    pub n2: usize,
    pub n3: usize,
    /// Total project capacity, spread as evenly as possible.
    pub total_project_cap: u64,
    /// Total lecturer capacity, spread as evenly as possible.
    pub total_lecturer_cap: u64,
    pub l_min: usize,
    pub l_max: usize,
    /// Probability that a student's list entry is tied with its predecessor.
    pub t_s: f64,
    /// Same for lecturer lists.
    pub t_l: f64,
    /// Weight of the most popular project relative to the least popular.
    #[serde(default = "default_popularity")]
    pub popularity_ratio: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_popularity() -> f64 {
    5.0
}

impl GenParams {
    pub fn validate(&self) -> Result<(), GenError> {
        let bad = |m: String| Err(GenError::InvalidParams(m));
        if self.n2 == 0 || self.n3 == 0 {
            return bad("need at least one project and one lecturer".into());
        }
        if self.n3 > self.n2 {
            return bad(format!("n3 = {} exceeds n2 = {}", self.n3, self.n2));
        }
        if self.l_min > self.l_max || self.l_max > self.n2 {
            return bad(format!(
                "list bounds [{}, {}] must satisfy l_min <= l_max <= n2 = {}",
                self.l_min, self.l_max, self.n2
            ));
        }
        for (name, t) in [("t_s", self.t_s), ("t_l", self.t_l)] {
            if !(0.0..=1.0).contains(&t) {
                return bad(format!("{name} = {t} is not a probability"));
            }
        }
        if !(self.popularity_ratio >= 1.0 && self.popularity_ratio.is_finite()) {
            return bad(format!("popularity_ratio = {} must be >= 1", self.popularity_ratio));
        }
        Ok(())
    }

    /// Total-capacity and size ratios shared by the SIZE, SCALS and SCALP
    /// families: n2 = 0.6 n1, n3 = 0.4 n1, capacities 1.4 n1 and 1.2 n1.
    fn size_family(n1: usize, ties: f64, l_min: usize, l_max: usize) -> Self {
        Self {
            n1,
            n2: n1 * 3 / 5,
            n3: n1 * 2 / 5,
            total_project_cap: (n1 * 7 / 5) as u64,
            total_lecturer_cap: (n1 * 6 / 5) as u64,
            l_min,
            l_max,
            t_s: ties,
            t_l: ties,
            popularity_ratio: default_popularity(),
            seed: 0,
        }
    }

    fn fixed_family(ties: f64, l_min: usize, l_max: usize) -> Self {
        Self {
            n1: 300,
            n2: 250,
            n3: 120,
            total_project_cap: 420,
            total_lecturer_cap: 360,
            l_min,
            l_max,
            t_s: ties,
            t_l: ties,
            popularity_ratio: default_popularity(),
            seed: 0,
        }
    }

    /// Like the SIZE family but for any student count.
    pub fn size_shaped(n1: usize) -> Self {
        Self::size_family(n1, 0.2, 3, 5)
    }
}

/// Names of every preset, in family order.
pub fn preset_names() -> Vec<String> {
    let mut names = Vec::new();
    let families: [(&str, usize); 5] = [("SIZE", 10), ("TIES", 11), ("PREF", 10), ("SCALS", 5), ("SCALP", 6)];
    for (family, count) in families {
        for k in 1..=count {
            names.push(format!("{family}{k}"));
        }
    }
    names
}

/// Parameters of a named benchmark case such as `SIZE3` or `TIES11`.
pub fn preset(name: &str) -> Result<GenParams, GenError> {
    let unknown = || GenError::UnknownPreset(name.to_owned());
    let split = name.find(|c: char| c.is_ascii_digit()).ok_or_else(unknown)?;
    let (family, num) = name.split_at(split);
    let k: usize = num.parse().map_err(|_| unknown())?;
    let params = match family {
        "SIZE" if (1..=10).contains(&k) => GenParams::size_family(100 * k, 0.2, 3, 5),
        "TIES" if (1..=11).contains(&k) => GenParams::fixed_family((k - 1) as f64 / 20.0, 3, 5),
        "PREF" if (1..=10).contains(&k) => GenParams::fixed_family(0.2, k, k),
        "SCALS" if (1..=5).contains(&k) => GenParams::size_family(10_000 * k, 0.2, 3, 5),
        "SCALP" if (1..=6).contains(&k) => GenParams::size_family(500, 0.4, 25 * k, 25 * k),
        _ => return Err(unknown()),
    };
    Ok(params)
}

/// Spreads `total` over `n` bins as evenly as possible; the bins receiving
/// the remainder are chosen at random.
fn spread(rng: &mut ChaCha8Rng, total: u64, n: usize) -> Vec<u32> {
    let base = (total / n as u64) as u32;
    let extra = (total % n as u64) as usize;
    let mut caps = vec![base; n];
    for j in index::sample(rng, n, extra) {
        caps[j] += 1;
    }
    caps
}

/// Splits `items` into tie groups, each item joining its predecessor's group
/// with probability `t`.
fn tie_up<T: Copy + Eq>(rng: &mut ChaCha8Rng, items: &[T], t: f64) -> PrefList<T> {
    let mut groups: Vec<Vec<T>> = Vec::new();
    for &x in items {
        match groups.last_mut() {
            Some(g) if rng.gen_bool(t) => g.push(x),
            _ => groups.push(vec![x]),
        }
    }
    PrefList::from_groups(groups)
}

/// Generates an instance. Project popularity falls linearly from
/// `popularity_ratio` for p1 to 1 for the last project.
pub fn generate(params: &GenParams) -> Result<Instance, GenError> {
    params.validate()?;
    let GenParams { n1, n2, n3, .. } = *params;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);

    let mut lecturer_order: Vec<usize> = (0..n3).collect();
    lecturer_order.shuffle(&mut rng);
    let project_lecturer: Vec<LecturerId> = (0..n2)
        .map(|j| LecturerId::from_index(lecturer_order[j % n3]))
        .collect();
    let project_capacity = spread(&mut rng, params.total_project_cap, n2);
    let lecturer_capacity = spread(&mut rng, params.total_lecturer_cap, n3);

    let r = params.popularity_ratio;
    let weights: Vec<f64> = (0..n2)
        .map(|j| {
            if n2 == 1 {
                1.0
            } else {
                1.0 + (r - 1.0) * (n2 - 1 - j) as f64 / (n2 - 1) as f64
            }
        })
        .collect();
    let popularity = WeightedIndex::new(&weights).expect("weights are positive");

    let mut student_prefs = Vec::with_capacity(n1);
    let mut chosen = vec![false; n2];
    for _ in 0..n1 {
        let len = rng.gen_range(params.l_min..=params.l_max);
        // Weighted sampling without replacement: redraw on repeats.
        let mut list = Vec::with_capacity(len);
        while list.len() < len {
            let j = popularity.sample(&mut rng);
            if !chosen[j] {
                chosen[j] = true;
                list.push(ProjectId::from_index(j));
            }
        }
        for p in &list {
            chosen[p.index()] = false;
        }
        student_prefs.push(tie_up(&mut rng, &list, params.t_s));
    }

    let mut ranked_by: Vec<Vec<StudentId>> = vec![Vec::new(); n3];
    let mut last_seen = vec![usize::MAX; n3];
    for (i, prefs) in student_prefs.iter().enumerate() {
        for p in prefs.items() {
            let k = project_lecturer[p.index()].index();
            if last_seen[k] != i {
                last_seen[k] = i;
                ranked_by[k].push(StudentId::from_index(i));
            }
        }
    }
    let lecturer_prefs = ranked_by
        .into_iter()
        .map(|mut students| {
            students.shuffle(&mut rng);
            tie_up(&mut rng, &students, params.t_l)
        })
        .collect();

    Ok(Instance::new(
        project_capacity,
        project_lecturer,
        lecturer_capacity,
        student_prefs,
        lecturer_prefs,
    )
    .expect("generated lists are consistent"))
}

/// Seed of the `index`-th instance of a batch.
pub fn instance_seed(master: u64, index: u64) -> u64 {
    master ^ index
}
