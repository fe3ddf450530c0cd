fn main() {
    std::process::exit(sclqg::run_from_args(std::env::args_os()));
}
