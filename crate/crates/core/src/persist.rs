//! Versioned on-disk format for the inverted index and the cluster model.
//!
//! Layout: magic `SDIV`, format version, artifact kind, the SHA-256 of the
//! source corpus, then the kind-specific payload, all little-endian. Loading
//! verifies magic, version, kind and checksum before reading the payload.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::cb2s::{ClusterModel, FeatureVector, ModelConfig, Vectorizer};
use crate::error::{PersistError, Result};
use crate::qgram::{Corpus, InvertedIndex, Posting, RecordId};

const MAGIC: [u8; 4] = *b"SDIV";
const FORMAT_VERSION: u32 = 1;
const KIND_INDEX: u8 = 1;
const KIND_MODEL: u8 = 2;
const NO_MEDOID: u32 = u32::MAX;

fn kind_name(kind: u8) -> String {
    match kind {
        KIND_INDEX => "index".to_string(),
        KIND_MODEL => "model".to_string(),
        other => format!("unknown ({other})"),
    }
}

struct Reader<R: Read> {
    inner: R,
}

impl<R: Read> Reader<R> {
    fn exact(&mut self, buf: &mut [u8]) -> Result<()> {
        self.inner.read_exact(buf).map_err(|e| {
            if e.kind() == io::ErrorKind::UnexpectedEof {
                PersistError::Truncated("unexpected end of file".into()).into()
            } else {
                crate::error::Error::Io(e)
            }
        })
    }

    fn u8(&mut self) -> Result<u8> {
        let mut b = [0u8; 1];
        self.exact(&mut b)?;
        Ok(b[0])
    }

    fn u32(&mut self) -> Result<u32> {
        let mut b = [0u8; 4];
        self.exact(&mut b)?;
        Ok(u32::from_le_bytes(b))
    }

    fn u64(&mut self) -> Result<u64> {
        let mut b = [0u8; 8];
        self.exact(&mut b)?;
        Ok(u64::from_le_bytes(b))
    }

    fn f64(&mut self) -> Result<f64> {
        let mut b = [0u8; 8];
        self.exact(&mut b)?;
        Ok(f64::from_le_bytes(b))
    }

    fn len(&mut self, what: &str) -> Result<usize> {
        let n = self.u64()?;
        // Corrupt lengths must not drive allocations.
        if n > 1 << 33 {
            return Err(PersistError::Truncated(format!("implausible {what} length {n}")).into());
        }
        Ok(n as usize)
    }

    fn string(&mut self) -> Result<String> {
        let len = self.u32()? as usize;
        if len > 1 << 24 {
            return Err(PersistError::Truncated(format!("implausible string length {len}")).into());
        }
        let mut buf = vec![0u8; len];
        self.exact(&mut buf)?;
        String::from_utf8(buf)
            .map_err(|_| PersistError::Truncated("invalid utf-8 in string".into()).into())
    }
}

fn write_string<W: Write>(w: &mut W, s: &str) -> Result<()> {
    w.write_all(&(s.len() as u32).to_le_bytes())?;
    w.write_all(s.as_bytes())?;
    Ok(())
}

fn write_header<W: Write>(w: &mut W, kind: u8, checksum: &[u8; 32]) -> Result<()> {
    w.write_all(&MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&[kind])?;
    w.write_all(checksum)?;
    Ok(())
}

fn read_header<R: Read>(r: &mut Reader<R>, expected_kind: u8, corpus: &Corpus) -> Result<()> {
    let mut magic = [0u8; 4];
    r.exact(&mut magic)?;
    if magic != MAGIC {
        return Err(PersistError::BadMagic.into());
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(PersistError::UnsupportedVersion(version).into());
    }
    let kind = r.u8()?;
    if kind != expected_kind {
        return Err(PersistError::WrongKind {
            expected: if expected_kind == KIND_INDEX { "index" } else { "model" },
            found: kind_name(kind),
        }
        .into());
    }
    let mut checksum = [0u8; 32];
    r.exact(&mut checksum)?;
    if checksum != corpus.checksum() {
        return Err(PersistError::StaleCorpus.into());
    }
    Ok(())
}

/// Writes the index; byte-identical for identical indexes.
pub fn save_index(index: &InvertedIndex, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_header(&mut w, KIND_INDEX, index.corpus_checksum())?;
    w.write_all(&(index.gram_len() as u32).to_le_bytes())?;
    w.write_all(&(index.record_count() as u64).to_le_bytes())?;
    w.write_all(&(index.gram_count() as u64).to_le_bytes())?;
    for (gram, postings) in index.iter_postings() {
        write_string(&mut w, gram)?;
        w.write_all(&(postings.len() as u64).to_le_bytes())?;
        for p in postings {
            w.write_all(&p.id.0.to_le_bytes())?;
            w.write_all(&p.count.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Loads an index, refusing artifacts built from a different corpus.
pub fn load_index(path: impl AsRef<Path>, corpus: &Corpus) -> Result<InvertedIndex> {
    let mut r = Reader { inner: BufReader::new(File::open(path)?) };
    read_header(&mut r, KIND_INDEX, corpus)?;
    let gram_len = r.u32()? as usize;
    let record_count = r.u64()? as usize;
    let gram_count = r.len("gram table")?;
    let mut postings: BTreeMap<String, Vec<Posting>> = BTreeMap::new();
    for _ in 0..gram_count {
        let gram = r.string()?;
        let n = r.len("posting list")?;
        let mut list = Vec::with_capacity(n);
        for _ in 0..n {
            let id = RecordId(r.u32()?);
            let count = r.u32()?;
            list.push(Posting { id, count });
        }
        postings.insert(gram, list);
    }
    Ok(InvertedIndex::from_parts(gram_len, record_count, corpus.checksum(), postings))
}

/// Writes the cluster model with full-precision vectors, so a loaded model
/// answers queries identically.
pub fn save_model(model: &ClusterModel, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_header(&mut w, KIND_MODEL, model.corpus_checksum())?;

    let cfg = model.config();
    w.write_all(&(cfg.dims as u32).to_le_bytes())?;
    w.write_all(&(model.cluster_count() as u32).to_le_bytes())?;
    w.write_all(&cfg.seed.to_le_bytes())?;
    w.write_all(&(cfg.max_iters as u32).to_le_bytes())?;
    w.write_all(&cfg.sample_rate.to_le_bytes())?;
    w.write_all(&(cfg.knn_k as u32).to_le_bytes())?;

    let vocab = model.vectorizer().grams();
    w.write_all(&(vocab.len() as u64).to_le_bytes())?;
    for gram in vocab {
        write_string(&mut w, gram)?;
    }

    w.write_all(&(model.record_count() as u64).to_le_bytes())?;
    for v in model.vectors() {
        for x in v.values() {
            w.write_all(&x.to_le_bytes())?;
        }
    }
    for &a in model.assignments() {
        w.write_all(&a.to_le_bytes())?;
    }
    for c in model.centroids() {
        for x in c.values() {
            w.write_all(&x.to_le_bytes())?;
        }
    }
    for m in model.medians() {
        w.write_all(&m.map_or(NO_MEDOID, |id| id.0).to_le_bytes())?;
    }
    let m = model.cluster_count();
    for i in 0..m {
        for j in 0..m {
            w.write_all(&model.centroid_distance(i, j).to_le_bytes())?;
        }
    }
    w.write_all(&(model.training_sample().len() as u64).to_le_bytes())?;
    for &(id, label) in model.training_sample() {
        w.write_all(&id.0.to_le_bytes())?;
        w.write_all(&label.to_le_bytes())?;
    }
    w.write_all(&(model.oversized_clusters().len() as u64).to_le_bytes())?;
    for &c in model.oversized_clusters() {
        w.write_all(&(c as u32).to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

/// Loads a model, refusing artifacts built from a different corpus.
pub fn load_model(path: impl AsRef<Path>, corpus: &Corpus) -> Result<ClusterModel> {
    let mut r = Reader { inner: BufReader::new(File::open(path)?) };
    read_header(&mut r, KIND_MODEL, corpus)?;

    let dims = r.u32()? as usize;
    let clusters = r.u32()? as usize;
    let seed = r.u64()?;
    let max_iters = r.u32()? as usize;
    let sample_rate = r.f64()?;
    let knn_k = r.u32()? as usize;
    let config = ModelConfig {
        dims,
        clusters: Some(clusters),
        seed,
        max_iters,
        sample_rate,
        knn_k,
    };

    let vocab_len = r.len("vocabulary")?;
    let mut grams = Vec::with_capacity(vocab_len);
    for _ in 0..vocab_len {
        grams.push(r.string()?);
    }
    let vectorizer = Vectorizer::from_grams(grams);

    let n = r.len("vector table")?;
    let mut vectors = Vec::with_capacity(n);
    for _ in 0..n {
        let mut values = Vec::with_capacity(dims);
        for _ in 0..dims {
            values.push(r.f64()?);
        }
        vectors.push(FeatureVector::from_values(values));
    }
    let mut assignments = Vec::with_capacity(n);
    for _ in 0..n {
        assignments.push(r.u32()?);
    }
    let mut centroids = Vec::with_capacity(clusters);
    for _ in 0..clusters {
        let mut values = Vec::with_capacity(dims);
        for _ in 0..dims {
            values.push(r.f64()?);
        }
        centroids.push(FeatureVector::from_values(values));
    }
    let mut medians = Vec::with_capacity(clusters);
    for _ in 0..clusters {
        let raw = r.u32()?;
        medians.push((raw != NO_MEDOID).then_some(RecordId(raw)));
    }
    let mut centroid_distances = Vec::with_capacity(clusters * clusters);
    for _ in 0..clusters * clusters {
        centroid_distances.push(r.f64()?);
    }
    let sample_len = r.len("training sample")?;
    let mut training_sample = Vec::with_capacity(sample_len);
    for _ in 0..sample_len {
        let id = RecordId(r.u32()?);
        let label = r.u32()?;
        training_sample.push((id, label));
    }
    let oversized_len = r.len("oversize list")?;
    let mut oversized = Vec::with_capacity(oversized_len);
    for _ in 0..oversized_len {
        oversized.push(r.u32()? as usize);
    }

    Ok(ClusterModel::from_parts(
        config,
        vectorizer,
        vectors,
        assignments,
        centroids,
        medians,
        centroid_distances,
        training_sample,
        oversized,
        corpus.checksum(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::generate_random_dataset;
    use crate::error::Error;
    use crate::metrics::SearchParams;

    #[test]
    fn index_round_trip_preserves_queries() {
        let corpus = generate_random_dataset(120, 4, 12, "abcd", 5).unwrap();
        let index = InvertedIndex::build(&corpus, 2).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("test.idx");
        save_index(&index, &path).unwrap();
        let loaded = load_index(&path, &corpus).unwrap();
        assert_eq!(index, loaded);

        let params = SearchParams::new(0.5, 2, 5, 1).unwrap();
        for q in ["abab", "dcba", "aaaa"] {
            let a = crate::greedy::gen_greedy(q, &params, &index, &corpus, 3).unwrap();
            let b = crate::greedy::gen_greedy(q, &params, &loaded, &corpus, 3).unwrap();
            assert_eq!(a.result, b.result);
        }
    }

    #[test]
    fn index_build_is_byte_identical() {
        let corpus = generate_random_dataset(80, 4, 10, "abc", 11).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p1 = dir.path().join("a.idx");
        let p2 = dir.path().join("b.idx");
        save_index(&InvertedIndex::build(&corpus, 2).unwrap(), &p1).unwrap();
        save_index(&InvertedIndex::build(&corpus, 2).unwrap(), &p2).unwrap();
        assert_eq!(std::fs::read(p1).unwrap(), std::fs::read(p2).unwrap());
    }

    #[test]
    fn model_round_trip_preserves_queries() {
        let corpus = generate_random_dataset(150, 6, 20, "abcdef", 23).unwrap();
        let model = ClusterModel::build(&corpus, &ModelConfig::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("test.model");
        save_model(&model, &path).unwrap();
        let loaded = load_model(&path, &corpus).unwrap();
        assert_eq!(model, loaded);

        let params = SearchParams::new(0.5, 3, 8, 0).unwrap();
        for q in ["abcdef", "fedcba", "aaaaaa"] {
            let a = crate::cb2s::cb2s_search(q, &params, &model, &corpus).unwrap();
            let b = crate::cb2s::cb2s_search(q, &params, &loaded, &corpus).unwrap();
            assert_eq!(a.result, b.result);
        }
    }

    #[test]
    fn truncated_file_is_an_error() {
        let corpus = generate_random_dataset(30, 4, 8, "ab", 2).unwrap();
        let index = InvertedIndex::build(&corpus, 2).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trunc.idx");
        save_index(&index, &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() / 2]).unwrap();
        assert!(matches!(
            load_index(&path, &corpus),
            Err(Error::Persist(PersistError::Truncated(_)))
        ));
    }

    #[test]
    fn stale_corpus_is_an_error() {
        let corpus = generate_random_dataset(30, 4, 8, "ab", 2).unwrap();
        let other = generate_random_dataset(30, 4, 8, "ab", 3).unwrap();
        let index = InvertedIndex::build(&corpus, 2).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("stale.idx");
        save_index(&index, &path).unwrap();
        assert!(matches!(
            load_index(&path, &other),
            Err(Error::Persist(PersistError::StaleCorpus))
        ));
    }

    #[test]
    fn bad_magic_and_wrong_kind() {
        let corpus = generate_random_dataset(10, 4, 8, "ab", 2).unwrap();
        let dir = tempfile::tempdir().unwrap();

        let path = dir.path().join("junk.idx");
        std::fs::write(&path, b"not an artifact at all").unwrap();
        assert!(matches!(
            load_index(&path, &corpus),
            Err(Error::Persist(PersistError::BadMagic))
        ));

        let index = InvertedIndex::build(&corpus, 2).unwrap();
        let path = dir.path().join("kind.idx");
        save_index(&index, &path).unwrap();
        assert!(matches!(
            load_model(&path, &corpus),
            Err(Error::Persist(PersistError::WrongKind { .. }))
        ));
    }
}
