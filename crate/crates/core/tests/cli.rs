use ff6v::cli::{execute, Cli};
use clap::Parser;
use sha2::{Digest, Sha256};

fn run(args: &[&str]) -> ff6v::cli::Output {
    execute(&Cli::try_parse_from(std::iter::once("ff6v").chain(args.iter().copied())).unwrap()).unwrap()
}

#[test]
fn verify_all_golden_checksum() {
    let o = run(&["verify", "all"]);
    assert!(o.pass, "{}", o.text);
    assert_eq!(hex::encode(Sha256::digest(o.text.as_bytes())), "32b1c2ac1b6e93ad46d88ac8bcb00118f713a4dfeb572a8e55eb1d210fe1f6a0");
}

#[test]
fn ybe_suite_reports_twenty_draws() {
    let o = run(&["verify", "ybe"]);
    assert!(o.pass);
    assert_eq!(o.text.matches("\"name\": \"ybe/").count(), 20);
}

#[test]
fn sample_svg_files_written() {
    let dir = std::env::temp_dir().join(format!("ff6v-svg-{}", std::process::id()));
    let o = run(&["sample", "--count", "2", "--seed", "11", "--svg-dir", dir.to_str().unwrap()]);
    assert!(o.text.contains("\"seed\": 12"));
    for s in [11, 12] {
        let svg = std::fs::read_to_string(dir.join(format!("tiling_{s}.svg"))).unwrap();
        assert!(svg.contains("<svg") && svg.trim_end().ends_with("</svg>"));
    }
}
