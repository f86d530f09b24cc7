//! Test double for the external oracle protocol.
//!
//!     stub-oracle constant <classes> <class>
//!     stub-oracle knn <dataset_dir> <name>
//!     stub-oracle wrong-length <classes>
//!     stub-oracle slow <classes> <seconds>
//!     stub-oracle bad-hello

use std::io::{BufRead, Write};
use std::path::Path;
use std::time::Duration;

use rulematrix::io::{load_dataset, LoadOptions};
use rulematrix_core::knn::NearestNeighbor;
use rulematrix_core::{Instances, Oracle};
use serde_json::{json, Value};

enum Mode {
    Constant(usize),
    Knn(NearestNeighbor),
    WrongLength,
    Slow(Duration),
    BadHello,
}

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let arg = |i: usize| args.get(i).map(String::as_str).unwrap_or_else(|| usage());
    let num = |i: usize| arg(i).parse::<u64>().unwrap_or_else(|_| usage());
    let (mode, classes) = match arg(0) {
        "constant" => (Mode::Constant(num(2) as usize), num(1) as usize),
        "knn" => {
            let table = load_dataset(Path::new(arg(1)), arg(2), LoadOptions::default()).expect("load dataset");
            let classes = table.class_count();
            (Mode::Knn(NearestNeighbor::fit(&table).expect("fit")), classes)
        }
        "wrong-length" => (Mode::WrongLength, num(1) as usize),
        "slow" => (Mode::Slow(Duration::from_secs(num(2))), num(1) as usize),
        "bad-hello" => (Mode::BadHello, 2),
        _ => usage(),
    };

    let stdin = std::io::stdin();
    let mut stdout = std::io::stdout();
    for line in stdin.lock().lines() {
        let Ok(line) = line else { break };
        let msg: Value = serde_json::from_str(&line).expect("json request");
        let reply = match msg["op"].as_str() {
            Some("hello") => match mode {
                Mode::BadHello => json!({"op": "hi"}),
                _ => json!({"op": "hello", "classes": classes}),
            },
            Some("predict") => {
                let rows: Vec<Vec<f64>> = serde_json::from_value(msg["instances"].clone()).expect("instances");
                let n = rows.len();
                match &mode {
                    Mode::Constant(c) => json!({"op": "labels", "labels": vec![*c; n]}),
                    Mode::WrongLength => json!({"op": "labels", "labels": vec![0; n + 1]}),
                    Mode::Slow(d) => {
                        std::thread::sleep(*d);
                        json!({"op": "labels", "labels": vec![0; n]})
                    }
                    Mode::Knn(model) => {
                        let width = rows.first().map_or(0, Vec::len);
                        let x = Instances::from_rows(width, &rows).expect("rectangular rows");
                        let proba = model.predict_proba(&x).expect("predict");
                        let labels = model.predict(&x).expect("predict");
                        json!({"op": "labels", "labels": labels, "proba": proba})
                    }
                    Mode::BadHello => unreachable!(),
                }
            }
            _ => json!({"op": "error"}),
        };
        if writeln!(stdout, "{reply}").and_then(|_| stdout.flush()).is_err() {
            break;
        }
    }
}

fn usage() -> ! {
    eprintln!("usage: stub-oracle constant|knn|wrong-length|slow|bad-hello ARGS");
    std::process::exit(1)
}
