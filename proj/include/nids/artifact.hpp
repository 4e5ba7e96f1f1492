#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace nids {

// Versioned binary container shared by every persisted model:
//   magic "NIDSART\0" | u32 version | u32 kind | u64 config digest |
//   u64 payload length | payload | u64 FNV-1a of all preceding bytes
// All integers little-endian. See docs/formats.md.
enum class ArtifactKind : std::uint32_t { Detector = 1, Meta = 2 };

inline constexpr std::string_view kArtifactMagic{"NIDSART\0", 8};
inline constexpr std::uint32_t kArtifactVersion = 1;

struct Container {
    ArtifactKind kind = ArtifactKind::Detector;
    std::uint64_t config_digest = 0;
    std::string payload;
};

std::string encode_container(const Container& c);
// Verifies magic, version, length and checksum; `origin` names the source in errors.
Container decode_container(std::string_view bytes, const std::string& origin = "<memory>");

void save_container(const std::filesystem::path& path, const Container& c);
Container load_container(const std::filesystem::path& path, ArtifactKind expected);

}  // namespace nids
