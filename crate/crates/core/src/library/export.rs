//! Zip export of a session:
//!
//! ```text
//! session.json            the full entry
//! plan.json               the attribute plan
//! sketches/sketch-NN.mid  one file per sketch
//! results/result-NN.<ext> rendered artifacts
//! reports/report-NN.json  alignment reports
//! ```

use std::io::{Cursor, Write};

use zip::write::SimpleFileOptions;
use zip::ZipWriter;

use super::{Library, LibraryError};
use crate::midi::emit_midi;
use crate::model::SessionEntry;

fn zip_error(e: zip::result::ZipError) -> LibraryError {
    LibraryError::StorageFailure(format!("zip: {e}"))
}

pub(super) fn session_zip(library: &Library, entry: &SessionEntry) -> Result<Vec<u8>, LibraryError> {
    let mut zip = ZipWriter::new(Cursor::new(Vec::new()));
    // Fixed timestamps keep exports byte-stable.
    let options = SimpleFileOptions::default().last_modified_time(zip::DateTime::default());
    let mut add = |name: String, bytes: &[u8]| -> Result<(), LibraryError> {
        zip.start_file(name, options).map_err(zip_error)?;
        zip.write_all(bytes)?;
        Ok(())
    };
    add("session.json".into(), &serde_json::to_vec_pretty(entry)?)?;
    add("plan.json".into(), &serde_json::to_vec_pretty(&entry.plan)?)?;
    for (i, sketch) in entry.sketches.iter().enumerate() {
        add(format!("sketches/sketch-{:02}.mid", i + 1), &emit_midi(sketch))?;
    }
    for (i, result) in entry.results.iter().enumerate() {
        let ext = result.output_ref.rsplit('.').next().unwrap_or("bin");
        add(
            format!("results/result-{:02}.{ext}", i + 1),
            &library.blobs.get(&result.output_ref)?,
        )?;
        add(
            format!("reports/report-{:02}.json", i + 1),
            &serde_json::to_vec_pretty(&result.report)?,
        )?;
    }
    Ok(zip.finish().map_err(zip_error)?.into_inner())
}
