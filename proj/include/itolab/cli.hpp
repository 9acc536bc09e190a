#pragma once

namespace itolab {

/// Entry point of the ito-lab tool. Exit codes: 0 success, 1 run failure,
/// 2 invalid input or violated precondition.
int run_cli(int argc, char** argv);

}  // namespace itolab
