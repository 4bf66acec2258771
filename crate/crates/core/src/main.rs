fn main() {
    std::process::exit(jointlabel::cli::run(std::env::args_os()));
}
