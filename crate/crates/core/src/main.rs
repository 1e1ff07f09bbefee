fn main() {
    std::process::exit(qkext::harness::cli::cli_main(std::env::args_os()));
}
