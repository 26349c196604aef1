//! JSON Lines encoding of test suites.
//!
//! Line 1 is a header object, every following line one case:
//!
//! ```text
//! {"suite_schema":1,"name":"...","stage":"T_o","seed":42,"task":{...}}
//! {"id":"...","texts":["..."],"expected_label":0,...}
//! ```

use alloc::format;
use alloc::string::String;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{Stage, TaskSpec, TestCase, TestSuite};

pub const SUITE_SCHEMA: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    suite_schema: u32,
    name: String,
    stage: Stage,
    seed: u64,
    task: TaskSpec,
}

/// Serializes `suite` with LF line endings and a trailing newline.
pub fn encode_suite(suite: &TestSuite) -> String {
    let header = Header {
        suite_schema: SUITE_SCHEMA,
        name: suite.name.clone(),
        stage: suite.stage,
        seed: suite.seed,
        task: suite.task.clone(),
    };
    let mut out = serde_json::to_string(&header).expect("header serializes");
    out.push('\n');
    for case in &suite.cases {
        out.push_str(&serde_json::to_string(case).expect("case serializes"));
        out.push('\n');
    }
    out
}

/// Parses a suite and checks its invariants. Errors name the 1-based line.
pub fn decode_suite(input: &str) -> Result<TestSuite> {
    let mut lines = input
        .split('\n')
        .enumerate()
        .map(|(i, l)| (i + 1, l.strip_suffix('\r').unwrap_or(l)))
        .filter(|(_, l)| !l.trim().is_empty());
    let (n, first) = lines.next().ok_or(Error::Parse {
        line: 1,
        message: "empty suite file".into(),
    })?;
    let header: Header = serde_json::from_str(first).map_err(|e| Error::Parse {
        line: n,
        message: format!("bad header: {e}"),
    })?;
    if header.suite_schema != SUITE_SCHEMA {
        return Err(Error::Parse {
            line: n,
            message: format!("unsupported suite_schema {}", header.suite_schema),
        });
    }
    let mut suite = TestSuite::new(header.name, header.stage, header.seed, header.task);
    for (n, line) in lines {
        let case: TestCase = serde_json::from_str(line).map_err(|e| Error::Parse {
            line: n,
            message: format!("bad case: {e}"),
        })?;
        suite.cases.push(case);
    }
    suite.validate()?;
    Ok(suite)
}
