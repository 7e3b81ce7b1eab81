fn main() {
    let argv: Vec<String> = std::env::args().collect();
    std::process::exit(kropina::cli::run(&argv));
}
