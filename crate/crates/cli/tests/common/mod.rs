#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use gridsvc::{DataMatrix, MatrixFormat};

pub fn gridsvc(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gridsvc"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

pub fn write_matrix(dir: &Path, name: &str, m: &DataMatrix) -> PathBuf {
    let path = dir.join(name);
    m.save(&path, MatrixFormat::Csv).unwrap();
    path
}

pub fn write_iris(dir: &Path) -> PathBuf {
    write_matrix(dir, "iris.csv", &gridsvc::datasets::iris())
}

/// Well-formed XML: every element closes and the parser reaches the end.
/// Returns the number of elements with `class="<class>"`.
pub fn count_class(svg: &str, class: &str) -> usize {
    use quick_xml::events::Event;
    let mut reader = quick_xml::Reader::from_str(svg);
    let mut count = 0;
    loop {
        match reader.read_event().expect("well-formed svg") {
            Event::Eof => break,
            Event::Start(e) | Event::Empty(e) => {
                let hit = e
                    .attributes()
                    .flatten()
                    .any(|a| a.key.into_inner() == "class" && &*a.value == class);
                count += hit as usize;
            }
            _ => {}
        }
    }
    count
}
