//! HTML report and CSV exports.

mod csv;
mod html;

pub use self::csv::{export_csv, write_csv_dir, CsvFile, TABLE_HEADER};
pub use self::html::{render_report, RenderOptions, ReportError};
