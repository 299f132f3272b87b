// Drives the command-line front end without spawning a process.

use inferplan::bench::sized_chain;
use inferplan::cli::dispatch_command;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::temp_dir().join(format!("inferplan-example-{}.json", std::process::id()));
    std::fs::write(&path, sized_chain(&[10, 20, 15]).to_json())?;
    let graph = path.to_str().ok_or("temp path is not UTF-8")?;
    for argv in [
        vec!["inferplan", "inspect", graph],
        vec!["inferplan", "plan-mem", "--compare", graph],
        vec!["inferplan", "plan-mem", "--strategy", "quantum", graph],
        vec!["inferplan", "pack", "--shape", "8,6,12", "--dims-only"],
    ] {
        let out = dispatch_command(&argv);
        println!("$ {}\nexit {}", argv[1..].join(" "), out.status);
        print!("{}", out.stdout);
        if let Some(line) = out.stderr.lines().next() {
            println!("stderr: {line}");
        }
    }
    std::fs::remove_file(&path)?;
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
