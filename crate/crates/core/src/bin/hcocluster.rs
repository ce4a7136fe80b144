fn main() {
    std::process::exit(hcocluster::cli::run_from(std::env::args_os()));
}
