#include "davrp/tensor.hpp"

extern "C" void openblas_set_num_threads(int);

namespace davrp::ta {

// Multi-threaded BLAS would make gradient accumulation order (and thus
// training) nondeterministic; pin it to one thread.
void use_single_thread_blas() {
    static const bool done = [] {
        openblas_set_num_threads(1);
        return true;
    }();
    (void)done;
}

}  // namespace davrp::ta
