fn main() {
    std::process::exit(genreid::pipeline::run_cli(std::env::args_os()));
}
