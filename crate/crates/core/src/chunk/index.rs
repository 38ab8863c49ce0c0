use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::describe::{BlockDescription, DescriptionSource};
use super::embed::{cosine, EmbedError, Embedder, EmbeddingVector};
use super::{Block, BlockId, BlockLayout, BlockMetadata, RenderedRow};
use crate::scalar::Scalar;
use crate::structure::RowSpan;

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("index is empty")]
    EmptyIndex,
    #[error("k must be at least 1")]
    InvalidK,
    #[error("embedding dimension {found} does not match index dimension {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("refusing to index an all-zero embedding for {0}")]
    ZeroVector(BlockId),
    #[error("index was built with embedder {index:?}, query embedder is {query:?}")]
    EmbedderMismatch { index: String, query: String },
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error("index file line {line}: {message}")]
    Format { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndexEntry<F> {
    pub block: Block,
    pub description: BlockDescription,
    pub embedding: EmbeddingVector<F>,
}

/// Exact-scan cosine index over block descriptions.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorIndex<F> {
    embedder_id: String,
    entries: Vec<IndexEntry<F>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct RecordMetadata {
    sheet_name: String,
    row_range: RowSpan,
    layout: BlockLayout,
    #[serde(flatten)]
    fields: BlockMetadata,
}

/// One line of the persisted index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "F: Scalar"))]
pub struct IndexRecord<F> {
    block_id: BlockId,
    metadata: RecordMetadata,
    description: String,
    description_source: DescriptionSource,
    embedding: EmbeddingVector<F>,
    embedder_id: String,
    header: Vec<RenderedRow>,
    rows: Vec<RenderedRow>,
}

impl<F: Scalar> VectorIndex<F> {
    pub fn new(embedder_id: impl Into<String>) -> Self {
        VectorIndex { embedder_id: embedder_id.into(), entries: Vec::new() }
    }

    /// Embeds each description and indexes it with its block.
    pub fn build(
        blocks: Vec<Block>,
        descriptions: Vec<BlockDescription>,
        embedder: &dyn Embedder<F>,
    ) -> Result<Self, IndexError> {
        let mut index = VectorIndex::new(embedder.id());
        for (block, description) in blocks.into_iter().zip(descriptions) {
            let embedding = embedder.embed(&description.text)?;
            index.insert(IndexEntry { block, description, embedding })?;
        }
        Ok(index)
    }

    pub fn insert(&mut self, entry: IndexEntry<F>) -> Result<(), IndexError> {
        if let Some(first) = self.entries.first() {
            if first.embedding.dim() != entry.embedding.dim() {
                return Err(IndexError::DimensionMismatch {
                    expected: first.embedding.dim(),
                    found: entry.embedding.dim(),
                });
            }
        }
        if entry.embedding.norm().partial_cmp(&F::zero()) != Some(std::cmp::Ordering::Greater) {
            return Err(IndexError::ZeroVector(entry.block.block_id.clone()));
        }
        self.entries.push(entry);
        Ok(())
    }

    pub fn embedder_id(&self) -> &str {
        &self.embedder_id
    }

    pub fn entries(&self) -> &[IndexEntry<F>] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: &BlockId) -> Option<&IndexEntry<F>> {
        self.entries.iter().find(|e| &e.block.block_id == id)
    }

    /// Top `min(k, len)` entries by descending cosine, ties by ascending block id.
    pub fn search(&self, query: &EmbeddingVector<F>, k: usize) -> Result<Vec<(usize, F)>, IndexError> {
        if k == 0 {
            return Err(IndexError::InvalidK);
        }
        let Some(first) = self.entries.first() else {
            return Err(IndexError::EmptyIndex);
        };
        if first.embedding.dim() != query.dim() {
            return Err(IndexError::DimensionMismatch { expected: first.embedding.dim(), found: query.dim() });
        }
        let mut scored: Vec<(usize, F)> = self
            .entries
            .iter()
            .enumerate()
            .map(|(i, e)| (i, cosine(query, &e.embedding)))
            .collect();
        scored.sort_by(|a, b| {
            b.1.partial_cmp(&a.1)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then_with(|| self.entries[a.0].block.block_id.cmp(&self.entries[b.0].block.block_id))
        });
        scored.truncate(k);
        Ok(scored)
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<(), IndexError> {
        for e in &self.entries {
            let rec = IndexRecord {
                block_id: e.block.block_id.clone(),
                metadata: RecordMetadata {
                    sheet_name: e.block.sheet_name.clone(),
                    row_range: e.block.row_range,
                    layout: e.block.layout,
                    fields: e.block.metadata.clone(),
                },
                description: e.description.text.clone(),
                description_source: e.description.source,
                embedding: e.embedding.clone(),
                embedder_id: self.embedder_id.clone(),
                header: e.block.header.clone(),
                rows: e.block.rows.clone(),
            };
            serde_json::to_writer(&mut out, &rec).map_err(std::io::Error::from)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(input: R) -> Result<Self, IndexError> {
        let mut index: Option<VectorIndex<F>> = None;
        for (i, line) in input.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let fmt_err = |message: String| IndexError::Format { line: i + 1, message };
            let rec: IndexRecord<F> = serde_json::from_str(&line).map_err(|e| fmt_err(e.to_string()))?;
            let idx = index.get_or_insert_with(|| VectorIndex::new(rec.embedder_id.clone()));
            if idx.embedder_id != rec.embedder_id {
                return Err(fmt_err(format!("mixed embedder ids {:?} and {:?}", idx.embedder_id, rec.embedder_id)));
            }
            let block = Block {
                block_id: rec.block_id.clone(),
                sheet_name: rec.metadata.sheet_name,
                row_range: rec.metadata.row_range,
                layout: rec.metadata.layout,
                metadata: rec.metadata.fields,
                header: rec.header,
                rows: rec.rows,
            };
            idx.insert(IndexEntry {
                block,
                description: BlockDescription {
                    block_id: rec.block_id,
                    text: rec.description,
                    source: rec.description_source,
                },
                embedding: rec.embedding,
            })?;
        }
        index.ok_or(IndexError::EmptyIndex)
    }
}

/// Embeds `query` and returns the top-k blocks with their cosine scores.
pub fn retrieve<'a, F: Scalar>(
    index: &'a VectorIndex<F>,
    embedder: &dyn Embedder<F>,
    query: &str,
    k: usize,
) -> Result<Vec<(&'a Block, F)>, IndexError> {
    if index.is_empty() {
        return Err(IndexError::EmptyIndex);
    }
    if k == 0 {
        return Err(IndexError::InvalidK);
    }
    let id = embedder.id();
    if id != index.embedder_id {
        return Err(IndexError::EmbedderMismatch { index: index.embedder_id.clone(), query: id });
    }
    let q = embedder.embed(query)?;
    Ok(index
        .search(&q, k)?
        .into_iter()
        .map(|(i, s)| (&index.entries[i].block, s))
        .collect())
}
