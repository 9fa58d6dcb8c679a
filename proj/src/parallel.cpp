#include "nullaudit/parallel.hpp"

#include <cstdlib>
#include <string>

namespace nullaudit::parallel {

std::size_t default_workers() {
    if (const char* env = std::getenv("NULLAUDIT_WORKERS")) {
        try {
            const long v = std::stol(env);
            if (v > 0) return static_cast<std::size_t>(v);
        } catch (...) {
        }
    }
    const unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : hc;
}

}  // namespace nullaudit::parallel
