//! The `.bra` model description language.

mod ast;
mod format;
mod parse;

pub use ast::*;
pub use format::{format, format_statement, same_structure};
pub use parse::{is_reserved, parse, ParseError};
