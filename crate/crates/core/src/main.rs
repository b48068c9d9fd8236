fn main() {
    std::process::exit(postscreen::cli::run_command(std::env::args_os()));
}
