#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "subxfer/vocab.hpp"

namespace subxfer {

/// Dense row-major float32 matrix, one row per vocabulary entry.
class EmbeddingMatrix {
 public:
  EmbeddingMatrix() = default;
  EmbeddingMatrix(std::size_t rows, std::size_t dim) : rows_(rows), dim_(dim), data_(rows * dim, 0.0f) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t dim() const noexcept { return dim_; }

  std::span<float> row(std::size_t r) { return {data_.data() + r * dim_, dim_}; }
  std::span<const float> row(std::size_t r) const { return {data_.data() + r * dim_, dim_}; }

  std::span<float> data() noexcept { return data_; }
  std::span<const float> data() const noexcept { return data_; }

  friend bool operator==(const EmbeddingMatrix&, const EmbeddingMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t dim_ = 0;
  std::vector<float> data_;
};

/// A matrix together with the vocabulary indexing its rows.
struct Embeddings {
  Vocab vocab;
  EmbeddingMatrix matrix;
};

}  // namespace subxfer
