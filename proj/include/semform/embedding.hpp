#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace semform {

struct EmbeddingVector {
    std::vector<double> values;

    std::size_t dimension() const { return values.size(); }
    std::span<const double> view() const { return values; }
    friend bool operator==(const EmbeddingVector&, const EmbeddingVector&) = default;
};

/// Anything that maps text to a fixed-dimension vector. Implementations
/// must be safe to call concurrently.
class Embedder {
public:
    virtual ~Embedder() = default;
    virtual EmbeddingVector embed(std::string_view text) const = 0;
};

}  // namespace semform
