//! Cooccurrence count tables, vocabularies, and corpus ingestion.
//!
//! Objects (the conditioning words `x`) and contexts (the conditioned
//! words `y`) live in separate vocabularies. Ids are dense and assigned in
//! first-seen order, so every table built from the same input is identical.

mod split;
mod vocab;

pub use split::{partition_folds, split_corpus, CorpusSplit, CrossValidation, SplitOptions};
pub use vocab::Vocabulary;

use std::collections::HashMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::similarity::SparseDistribution;

/// Dense id of a conditioning object `x`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ObjectId(pub u32);

/// Dense id of a context `y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ContextId(pub u32);

impl ObjectId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl ContextId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// A single observed `(object, context)` event.
pub type Occurrence = (ObjectId, ContextId);

const COUNTS_FORMAT: &str = "distsim-pair-counts";
const COUNTS_VERSION: u32 = 1;

/// Sparse cooccurrence counts `C(x,y)` with both marginals and the total.
///
/// Objects or contexts whose marginal is zero (for example after
/// [`PairCounts::filter_singletons`]) stay in the vocabulary but are
/// unusable: they have no distribution and models refuse to condition on them.
#[derive(Debug, Clone, PartialEq)]
pub struct PairCounts {
    objects: Vocabulary,
    contexts: Vocabulary,
    rows: Vec<Vec<(ContextId, u64)>>,
    object_marginals: Vec<u64>,
    context_marginals: Vec<u64>,
    total: u64,
}

impl PairCounts {
    /// Builds a table from per-object rows. Rows are sorted and zero entries dropped.
    fn from_rows(objects: Vocabulary, contexts: Vocabulary, mut rows: Vec<Vec<(ContextId, u64)>>) -> Self {
        rows.resize(objects.len(), Vec::new());
        let mut object_marginals = vec![0u64; objects.len()];
        let mut context_marginals = vec![0u64; contexts.len()];
        let mut total = 0u64;
        for (x, row) in rows.iter_mut().enumerate() {
            row.retain(|&(_, c)| c > 0);
            row.sort_unstable_by_key(|&(y, _)| y);
            for &(y, c) in row.iter() {
                object_marginals[x] += c;
                context_marginals[y.index()] += c;
                total += c;
            }
        }
        PairCounts {
            objects,
            contexts,
            rows,
            object_marginals,
            context_marginals,
            total,
        }
    }

    /// Counts a list of occurrences against fixed vocabularies.
    pub fn from_occurrences(objects: Vocabulary, contexts: Vocabulary, occurrences: &[Occurrence]) -> Self {
        let mut maps: Vec<HashMap<ContextId, u64>> = vec![HashMap::new(); objects.len()];
        for &(x, y) in occurrences {
            *maps[x.index()].entry(y).or_insert(0) += 1;
        }
        let rows = maps.into_iter().map(|m| m.into_iter().collect()).collect();
        Self::from_rows(objects, contexts, rows)
    }

    pub fn objects(&self) -> &Vocabulary {
        &self.objects
    }

    pub fn contexts(&self) -> &Vocabulary {
        &self.contexts
    }

    pub fn num_objects(&self) -> usize {
        self.objects.len()
    }

    pub fn num_contexts(&self) -> usize {
        self.contexts.len()
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    /// `C(x,y)`, zero for unseen pairs and out-of-range ids.
    pub fn count(&self, x: ObjectId, y: ContextId) -> u64 {
        self.rows
            .get(x.index())
            .and_then(|row| row.binary_search_by_key(&y, |&(c, _)| c).ok().map(|i| row[i].1))
            .unwrap_or(0)
    }

    /// Sorted `(context, count)` entries of object `x`.
    pub fn row(&self, x: ObjectId) -> &[(ContextId, u64)] {
        self.rows.get(x.index()).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn object_marginal(&self, x: ObjectId) -> u64 {
        self.object_marginals.get(x.index()).copied().unwrap_or(0)
    }

    pub fn context_marginal(&self, y: ContextId) -> u64 {
        self.context_marginals.get(y.index()).copied().unwrap_or(0)
    }

    pub fn object_marginals(&self) -> &[u64] {
        &self.object_marginals
    }

    pub fn context_marginals(&self) -> &[u64] {
        &self.context_marginals
    }

    pub fn is_usable_object(&self, x: ObjectId) -> bool {
        self.object_marginal(x) > 0
    }

    pub fn is_usable_context(&self, y: ContextId) -> bool {
        self.context_marginal(y) > 0
    }

    /// Objects with a positive marginal, in id order.
    pub fn usable_objects(&self) -> impl Iterator<Item = ObjectId> + '_ {
        (0..self.num_objects() as u32)
            .map(ObjectId)
            .filter(|&x| self.is_usable_object(x))
    }

    /// Contexts with a positive marginal, in id order.
    pub fn usable_contexts(&self) -> impl Iterator<Item = ContextId> + '_ {
        (0..self.num_contexts() as u32)
            .map(ContextId)
            .filter(|&y| self.is_usable_context(y))
    }

    /// Number of distinct seen pairs.
    pub fn distinct_pairs(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    /// All seen pairs with their counts, ordered by object then context.
    pub fn iter_pairs(&self) -> impl Iterator<Item = (ObjectId, ContextId, u64)> + '_ {
        self.rows
            .iter()
            .enumerate()
            .flat_map(|(x, row)| row.iter().map(move |&(y, c)| (ObjectId(x as u32), y, c)))
    }

    pub fn object_id(&self, surface: &str) -> Option<ObjectId> {
        self.objects.get(surface).map(ObjectId)
    }

    pub fn context_id(&self, surface: &str) -> Option<ContextId> {
        self.contexts.get(surface).map(ContextId)
    }

    /// Inverted index: for every context, the `(object, count)` entries sorted by object.
    pub fn columns(&self) -> Vec<Vec<(ObjectId, u64)>> {
        let mut cols = vec![Vec::new(); self.num_contexts()];
        for (x, y, c) in self.iter_pairs() {
            cols[y.index()].push((x, c));
        }
        cols
    }

    /// Maximum-likelihood distribution `C(x,·)/C(x)`, `None` for unusable objects.
    pub fn mle_distribution(&self, x: ObjectId) -> Option<SparseDistribution> {
        let marginal = self.object_marginal(x);
        if marginal == 0 {
            return None;
        }
        let denom = marginal as f64;
        Some(SparseDistribution::from_sorted_unchecked(
            self.row(x).iter().map(|&(y, c)| (y, c as f64 / denom)).collect(),
        ))
    }

    /// MLE rows for every object id (`None` where unusable).
    pub fn mle_distributions(&self) -> Vec<Option<SparseDistribution>> {
        (0..self.num_objects() as u32)
            .map(|x| self.mle_distribution(ObjectId(x)))
            .collect()
    }

    /// Counts-of-counts `m -> n_m` over seen pairs.
    pub fn counts_of_counts(&self) -> std::collections::BTreeMap<u64, u64> {
        let mut out = std::collections::BTreeMap::new();
        for (_, _, c) in self.iter_pairs() {
            *out.entry(c).or_insert(0) += 1;
        }
        out
    }

    /// Drops every pair seen exactly once. Vocabularies are untouched, so
    /// objects or contexts that lose all their pairs become unusable.
    pub fn filter_singletons(&self) -> PairCounts {
        let rows = self
            .rows
            .iter()
            .map(|row| row.iter().copied().filter(|&(_, c)| c != 1).collect())
            .collect();
        Self::from_rows(self.objects.clone(), self.contexts.clone(), rows)
    }

    /// Keeps the `top_n` objects by marginal frequency; ties go to the
    /// lexicographically smaller surface form. Pairs of dropped objects are discarded.
    pub fn truncate_objects(&self, top_n: usize) -> PairCounts {
        let mut order: Vec<ObjectId> = self.usable_objects().collect();
        order.sort_by(|&a, &b| {
            self.object_marginal(b)
                .cmp(&self.object_marginal(a))
                .then_with(|| self.objects.surface(a.0).cmp(self.objects.surface(b.0)))
        });
        let mut keep = vec![false; self.num_objects()];
        for x in order.into_iter().take(top_n) {
            keep[x.index()] = true;
        }
        let rows = self
            .rows
            .iter()
            .enumerate()
            .map(|(x, row)| if keep[x] { row.clone() } else { Vec::new() })
            .collect();
        Self::from_rows(self.objects.clone(), self.contexts.clone(), rows)
    }

    /// Writes the table as a pair file (`object\tcontext\tcount`).
    pub fn write_pair_file<W: Write>(&self, mut out: W) -> Result<()> {
        for (x, y, c) in self.iter_pairs() {
            writeln!(
                out,
                "{}\t{}\t{}",
                self.objects.surface(x.0),
                self.contexts.surface(y.0),
                c
            )?;
        }
        Ok(())
    }

    /// Serializes into the versioned JSON container.
    pub fn write_json<W: Write>(&self, out: W) -> Result<()> {
        let wire = CountsWire {
            format: COUNTS_FORMAT.to_string(),
            version: COUNTS_VERSION,
            objects: self.objects.clone(),
            contexts: self.contexts.clone(),
            rows: self
                .rows
                .iter()
                .map(|row| row.iter().map(|&(y, c)| (y.0, c)).collect())
                .collect(),
        };
        serde_json::to_writer(out, &wire)?;
        Ok(())
    }

    pub fn read_json<R: std::io::Read>(input: R) -> Result<PairCounts> {
        let wire: CountsWire = serde_json::from_reader(input)?;
        if wire.format != COUNTS_FORMAT || wire.version != COUNTS_VERSION {
            return Err(Error::Format(format!(
                "expected {COUNTS_FORMAT} v{COUNTS_VERSION}, found {} v{}",
                wire.format, wire.version
            )));
        }
        if wire.rows.len() != wire.objects.len() {
            return Err(Error::Format("row count does not match object vocabulary".into()));
        }
        let n_ctx = wire.contexts.len() as u32;
        let mut rows = Vec::with_capacity(wire.rows.len());
        for row in wire.rows {
            let mut out = Vec::with_capacity(row.len());
            for (y, c) in row {
                if y >= n_ctx {
                    return Err(Error::UnknownContext(y));
                }
                out.push((ContextId(y), c));
            }
            rows.push(out);
        }
        Ok(Self::from_rows(wire.objects, wire.contexts, rows))
    }

    pub fn to_json_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_json(&mut buf).expect("in-memory serialization");
        buf
    }
}

#[derive(Serialize, Deserialize)]
struct CountsWire {
    format: String,
    version: u32,
    objects: Vocabulary,
    contexts: Vocabulary,
    rows: Vec<Vec<(u32, u64)>>,
}

/// Incrementally accumulates counts. Shards built independently can be merged.
#[derive(Debug, Clone, Default)]
pub struct PairCountsBuilder {
    objects: Vocabulary,
    contexts: Vocabulary,
    counts: HashMap<(u32, u32), u64>,
}

impl PairCountsBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, object: &str, context: &str, count: u64) {
        let x = self.objects.intern(object);
        let y = self.contexts.intern(context);
        *self.counts.entry((x, y)).or_insert(0) += count;
    }

    /// Folds another shard into this one; ids of `other` are remapped by surface form.
    pub fn merge(&mut self, other: PairCountsBuilder) {
        let mut entries: Vec<_> = other.counts.into_iter().collect();
        entries.sort_unstable();
        for ((x, y), c) in entries {
            let object = other.objects.surface(x).to_string();
            let context = other.contexts.surface(y).to_string();
            self.add(&object, &context, c);
        }
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn build(self) -> Result<PairCounts> {
        if self.counts.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let mut rows = vec![Vec::new(); self.objects.len()];
        for ((x, y), c) in self.counts {
            rows[x as usize].push((ContextId(y), c));
        }
        Ok(PairCounts::from_rows(self.objects, self.contexts, rows))
    }
}

/// Options shared by the ingestion entry points.
#[derive(Debug, Clone, Copy, Default)]
pub struct IngestOptions {
    pub lowercase: bool,
}

fn parse_pair_line(line: &str, lineno: usize, opts: IngestOptions) -> Result<Option<(String, String, u64)>> {
    let line = line.strip_suffix('\r').unwrap_or(line);
    if line.trim().is_empty() {
        return Ok(None);
    }
    let fields: Vec<&str> = line.split('\t').collect();
    if fields.len() < 2 || fields.len() > 3 {
        return Err(Error::MalformedLine {
            line: lineno,
            reason: format!("expected 2 or 3 tab-separated fields, found {}", fields.len()),
        });
    }
    if fields[0].is_empty() || fields[1].is_empty() {
        return Err(Error::MalformedLine {
            line: lineno,
            reason: "empty object or context".into(),
        });
    }
    let count = match fields.get(2) {
        None => 1,
        Some(raw) => match raw.trim().parse::<u64>() {
            Ok(c) if c > 0 => c,
            _ => {
                return Err(Error::InvalidCount {
                    line: lineno,
                    value: raw.to_string(),
                })
            }
        },
    };
    let norm = |s: &str| {
        if opts.lowercase {
            s.to_lowercase()
        } else {
            s.to_string()
        }
    };
    Ok(Some((norm(fields[0]), norm(fields[1]), count)))
}

/// Reads a pair file (`object\tcontext[\tcount]` per line) into a count table.
pub fn ingest_pairs<R: BufRead>(source: R, opts: IngestOptions) -> Result<PairCounts> {
    let mut builder = PairCountsBuilder::new();
    for (i, line) in source.lines().enumerate() {
        if let Some((x, y, c)) = parse_pair_line(&line?, i + 1, opts)? {
            builder.add(&x, &y, c);
        }
    }
    builder.build()
}

/// Occurrence-level view of a corpus, needed wherever repeated test pairs
/// must be weighted by frequency.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct OccurrenceList {
    pub objects: Vocabulary,
    pub contexts: Vocabulary,
    pub occurrences: Vec<Occurrence>,
}

impl OccurrenceList {
    pub fn push(&mut self, object: &str, context: &str) {
        let x = ObjectId(self.objects.intern(object));
        let y = ContextId(self.contexts.intern(context));
        self.occurrences.push((x, y));
    }

    pub fn len(&self) -> usize {
        self.occurrences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.occurrences.is_empty()
    }

    /// Counts every occurrence.
    pub fn counts(&self) -> PairCounts {
        PairCounts::from_occurrences(self.objects.clone(), self.contexts.clone(), &self.occurrences)
    }
}

/// Reads a pair file keeping every occurrence (a count of `n` expands to `n` copies).
pub fn ingest_occurrences<R: BufRead>(source: R, opts: IngestOptions) -> Result<OccurrenceList> {
    let mut list = OccurrenceList::default();
    for (i, line) in source.lines().enumerate() {
        if let Some((x, y, c)) = parse_pair_line(&line?, i + 1, opts)? {
            for _ in 0..c {
                list.push(&x, &y);
            }
        }
    }
    if list.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    Ok(list)
}

/// Adjacent word pairs `(w_i, w_{i+1})` of a token file with one sentence per line.
/// Pairs never span a line boundary.
pub fn extract_adjacent_bigrams<R: BufRead>(tokens: R, opts: IngestOptions) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for line in tokens.lines() {
        let line = line?;
        let words: Vec<String> = line
            .split_whitespace()
            .map(|w| {
                if opts.lowercase {
                    w.to_lowercase()
                } else {
                    w.to_string()
                }
            })
            .collect();
        for pair in words.windows(2) {
            out.push((pair[0].clone(), pair[1].clone()));
        }
    }
    Ok(out)
}

/// Bigram occurrences of a token file.
pub fn ingest_tokens<R: BufRead>(tokens: R, opts: IngestOptions) -> Result<OccurrenceList> {
    let mut list = OccurrenceList::default();
    for (a, b) in extract_adjacent_bigrams(tokens, opts)? {
        list.push(&a, &b);
    }
    if list.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    Ok(list)
}

#[cfg(test)]
mod tests {
    use super::*;

    const ROSE: &str = "a rose is a rose is not a nose";

    fn rose() -> PairCounts {
        ingest_tokens(ROSE.as_bytes(), IngestOptions::default())
            .unwrap()
            .counts()
    }

    fn id(c: &PairCounts, x: &str, y: &str) -> (ObjectId, ContextId) {
        (c.object_id(x).unwrap(), c.context_id(y).unwrap())
    }

    #[test]
    fn rose_counts() {
        let c = rose();
        let (a, rose_) = id(&c, "a", "rose");
        let nose = c.context_id("nose").unwrap();
        assert_eq!(c.count(a, rose_), 2);
        assert_eq!(c.count(a, nose), 1);
        assert_eq!(c.object_marginal(a), 3);
        assert_eq!(c.total(), 8);
    }

    #[test]
    fn bigram_extraction() {
        let pairs = extract_adjacent_bigrams(ROSE.as_bytes(), IngestOptions::default()).unwrap();
        assert_eq!(pairs.len(), 8);
        assert_eq!(pairs[0], ("a".to_string(), "rose".to_string()));

        let single = extract_adjacent_bigrams("word\n".as_bytes(), IngestOptions::default()).unwrap();
        assert!(single.is_empty());

        let two = extract_adjacent_bigrams("x y\ny z\n".as_bytes(), IngestOptions::default()).unwrap();
        assert_eq!(two, vec![("x".into(), "y".into()), ("y".into(), "z".into())]);
    }

    #[test]
    fn lowercase_flag() {
        let pairs = extract_adjacent_bigrams("A Rose".as_bytes(), IngestOptions { lowercase: true }).unwrap();
        assert_eq!(pairs, vec![("a".into(), "rose".into())]);
    }

    #[test]
    fn pair_file_counts_add_up() {
        let c = ingest_pairs("dog\tbarks\t3\ndog\tbarks\t3\n".as_bytes(), IngestOptions::default()).unwrap();
        let (d, b) = id(&c, "dog", "barks");
        assert_eq!(c.count(d, b), 6);
        assert_eq!(c.total(), 6);
    }

    #[test]
    fn ingest_errors() {
        assert!(matches!(
            ingest_pairs("".as_bytes(), IngestOptions::default()),
            Err(Error::EmptyCorpus)
        ));
        assert!(matches!(
            ingest_pairs("a\tb\nonlyone\n".as_bytes(), IngestOptions::default()),
            Err(Error::MalformedLine { line: 2, .. })
        ));
        assert!(matches!(
            ingest_pairs("a\tb\t0\n".as_bytes(), IngestOptions::default()),
            Err(Error::InvalidCount { line: 1, .. })
        ));
        assert!(matches!(
            ingest_pairs("a\tb\t-2\n".as_bytes(), IngestOptions::default()),
            Err(Error::InvalidCount { line: 1, .. })
        ));
    }

    #[test]
    fn singleton_filter() {
        let f = rose().filter_singletons();
        assert_eq!(f.distinct_pairs(), 2);
        assert_eq!(f.total(), 4);
        let (a, r) = id(&f, "a", "rose");
        let (ro, is) = id(&f, "rose", "is");
        assert_eq!(f.count(a, r), 2);
        assert_eq!(f.count(ro, is), 2);
        // "not" lost its only pair but keeps its id
        let not = f.object_id("not").unwrap();
        assert!(!f.is_usable_object(not));
        assert_eq!(f.num_objects(), 4);

        let only_singletons = ingest_pairs("a\tb\nc\td\n".as_bytes(), IngestOptions::default()).unwrap();
        assert_eq!(only_singletons.filter_singletons().distinct_pairs(), 0);

        let none = ingest_pairs("a\tb\t2\nc\td\t3\n".as_bytes(), IngestOptions::default()).unwrap();
        assert_eq!(none.filter_singletons(), none);
    }

    #[test]
    fn truncation_breaks_ties_lexicographically() {
        let c = ingest_pairs(
            "b\tv\t2\na\tv\t2\nc\tv\t5\nd\tw\t1\n".as_bytes(),
            IngestOptions::default(),
        )
        .unwrap();
        let t = c.truncate_objects(2);
        let kept: Vec<&str> = t.usable_objects().map(|x| t.objects().surface(x.0)).collect();
        assert_eq!(kept, vec!["a", "c"]);
        assert_eq!(t.total(), 7);
    }

    #[test]
    fn merged_shards_match_single_pass() {
        let mut a = PairCountsBuilder::new();
        a.add("x", "y", 2);
        a.add("z", "y", 1);
        let mut b = PairCountsBuilder::new();
        b.add("z", "y", 4);
        b.add("x", "w", 1);
        a.merge(b);
        let merged = a.build().unwrap();

        let mut single = PairCountsBuilder::new();
        single.add("x", "y", 2);
        single.add("z", "y", 5);
        single.add("x", "w", 1);
        assert_eq!(merged, single.build().unwrap());
    }

    #[test]
    fn json_round_trip() {
        let c = rose();
        let back = PairCounts::read_json(c.to_json_bytes().as_slice()).unwrap();
        assert_eq!(back, c);
    }
}
