#pragma once

// Helpers shared by the workflow translation units.

#include <filesystem>
#include <string>

#include "fdsi/workflow.hpp"

namespace fdsi::workflow::detail {

/// Members per decode/encode batch. Fixed so results do not depend on the worker count.
inline constexpr std::size_t kMemberChunk = 16;

void log(const CommandOptions& options, const std::string& line);
/// Hash of the configuration sections that determine the trained parameterizer.
[[nodiscard]] std::string training_hash(const config::RunConfig& config);
/// Checkpoint written for this training hash and norm stats, with intact arrays.
[[nodiscard]] bool checkpoint_current(const fs::path& dir, const std::string& hash, const std::string& norm_hash) noexcept;
void write_text_file(const std::filesystem::path& path, const std::string& text);
[[nodiscard]] std::string read_text_file(const std::filesystem::path& path);

/// Encodes data columns; one latent row per column.
[[nodiscard]] RowMatrix encode_rows(const latent::Parameterizer& model, const Eigen::MatrixXd& columns,
                                    std::size_t workers);
/// Decoded, denormalised d_full rows.
[[nodiscard]] RowMatrix decode_rows(const latent::Parameterizer& model, const RowMatrix& latents,
                                    const datavec::NormStats& stats, const datavec::DataLayout& layout,
                                    std::size_t workers);

}  // namespace fdsi::workflow::detail
