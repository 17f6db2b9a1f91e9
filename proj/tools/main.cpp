#include <atomic>
#include <csignal>
#include <iostream>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "cli/commands.hpp"

namespace {

std::atomic<bool> g_interrupted{false};

extern "C" void on_signal(int) { g_interrupted.store(true); }

}  // namespace

int main(int argc, char** argv) {
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  spdlog::set_default_logger(spdlog::stderr_color_mt("xlprime"));
  spdlog::set_pattern("[%H:%M:%S] %v");
  return xlp::cli::run(argc, argv, std::cout, std::cerr, xlp::cli::process_environment(), &g_interrupted);
}
