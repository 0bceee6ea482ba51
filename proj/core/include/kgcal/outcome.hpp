#pragma once

#include <algorithm>
#include <cstddef>
#include <iterator>

#include "kgcal/types.hpp"

namespace kgcal {

// Per-query comparison of an answer set against ground truth. Every recall,
// precision and loss figure in the library is derived from this type.
struct QueryOutcome {
    std::size_t hits = 0;
    std::size_t truth_size = 0;
    std::size_t answer_size = 0;

    bool abstained() const noexcept { return answer_size == 0; }
    // Abstentions score zero recall and zero precision.
    double recall() const noexcept {
        return truth_size == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(truth_size);
    }
    double precision() const noexcept {
        return answer_size == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(answer_size);
    }
    // False negative rate; 1 for abstentions.
    double loss() const noexcept { return 1.0 - recall(); }
};

inline QueryOutcome compare_answers(const EntitySet& answers, const EntitySet& truth) {
    QueryOutcome o;
    o.truth_size = truth.size();
    o.answer_size = answers.size();
    auto a = answers.begin();
    auto t = truth.begin();
    while (a != answers.end() && t != truth.end()) {
        if (*a < *t) {
            ++a;
        } else if (*t < *a) {
            ++t;
        } else {
            ++o.hits;
            ++a;
            ++t;
        }
    }
    return o;
}

}  // namespace kgcal
