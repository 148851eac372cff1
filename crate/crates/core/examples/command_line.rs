// Drives the command-line front end in-process.

pub fn run_example() -> diqkd::Result<()> {
    let out = std::env::temp_dir().join("diqkd-example-cli");
    let out = out.to_string_lossy().into_owned();
    let status = diqkd::cli::main_with_args([
        "diqkd", "--mode", "keyrate", "--inequality", "CHSH", "--samples", "3000", "--bins", "50",
        "--seed", "7", "--out", &out,
    ]);
    println!("exit status {status}");
    println!("{}", std::fs::read_to_string(format!("{out}/summary.json"))?);
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
