//! Turn questions into pipelines with the rule decomposer, then plug in a
//! stand-in remote model to show the fallback path.
//!
//!     cargo run -p datamate-core --example decompose_question

use std::sync::Arc;

use datamate_core::corpus::bundled;
use datamate_core::decomposer::{
    resolve, Candidate, RemoteError, RemoteModelClient, ResolveConfig, Strategy,
};
use datamate_core::{execute, serialize};

/// Always proposes the same two candidates; the first does not validate.
struct CannedModel;

impl RemoteModelClient for CannedModel {
    fn generate(&self, _prompt: &str, _beam: usize) -> Result<Vec<Candidate>, RemoteError> {
        Ok(vec![
            Candidate {
                text: "SELECT['planes']".into(),
                score: 0.9,
            },
            Candidate {
                text: "SELECT['graduates']; SUPERLATIVE[#1, 'starting_salary', max]".into(),
                score: 0.8,
            },
        ])
    }
}

fn main() {
    let graduates = bundled("graduates").expect("bundled graduates");
    let questions = [
        "how many graduates?",
        "what is the average starting salary of graduates by major?",
        "list graduates sorted by gpa desc",
        "which graduate has the highest starting salary?",
        "how many graduates whose degree is 'PhD'?",
        "what pays best?",
    ];
    let rules = ResolveConfig::default();
    let with_model = ResolveConfig {
        strategy: Strategy::RulesThenRemote,
        remote: Some(Arc::new(CannedModel)),
        ..ResolveConfig::default()
    };
    for q in questions {
        println!("Q: {q}");
        let resolved = resolve(q, &graduates, &rules).or_else(|e| {
            println!("   rules: {e}");
            resolve(q, &graduates, &with_model)
        });
        match resolved {
            Ok(r) => {
                let answer = execute(&r.pipeline, &graduates).map(|t| t.answer);
                println!(
                    "   {:?} candidate {} of {}",
                    r.candidates.source,
                    r.chosen + 1,
                    r.candidates.len()
                );
                println!("   {}", serialize(&r.pipeline));
                if let Ok(a) = answer {
                    let json = serde_json::to_string(&a).unwrap();
                    println!(
                        "   = {}",
                        if json.len() > 100 {
                            format!("{}...", &json[..100])
                        } else {
                            json
                        }
                    );
                }
            }
            Err(e) => println!("   failed: {e}"),
        }
    }
}
