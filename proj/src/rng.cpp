#include "nullaudit/rng.hpp"

namespace nullaudit::rng {

void fill_rademacher(Stream& s, double* out, std::size_t n) {
    std::size_t t = 0;
    while (t < n) {
        std::uint64_t w = s.bits();
        const std::size_t take = (n - t < 64) ? n - t : 64;
        for (std::size_t b = 0; b < take; ++b, ++t) {
            out[t] = (w & 1ULL) ? 1.0 : -1.0;
            w >>= 1;
        }
    }
}

}  // namespace nullaudit::rng
