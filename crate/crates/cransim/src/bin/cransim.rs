fn main() {
    std::process::exit(cransim::harness::cli_main(std::env::args_os()));
}
