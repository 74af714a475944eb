//! Table-of-contents generation from layout-annotated documents.
//!
//! The pipeline segments a document into text blocks, classifies each block as
//! title or non-title with a character-level CNN, assigns hierarchy levels to the
//! detected titles with a word-level CNN encoder feeding a BiLSTM-CRF, and
//! rebuilds a valid TOC tree from the labeled sequence.

pub mod detector;
pub mod doc;
pub mod error;
pub mod features;
pub mod harness;
pub mod hierarchizer;
pub mod metrics;
pub mod nn;
pub mod segment;
pub mod template;
pub mod text;
pub mod train;
pub mod tree;

pub use doc::{Document, TextBlock, TextLine, TocEntry, TocTree};
pub use error::{Error, Result};
