#include "nids/artifact.hpp"

#include "nids/binary_io.hpp"
#include "nids/common.hpp"

namespace nids {

std::string encode_container(const Container& c) {
    ByteWriter w;
    w.raw(kArtifactMagic);
    w.u32(kArtifactVersion);
    w.u32(static_cast<std::uint32_t>(c.kind));
    w.u64(c.config_digest);
    w.u64(c.payload.size());
    w.raw(c.payload);
    const auto sum = digest(w.bytes());
    w.u64(sum);
    return w.take();
}

Container decode_container(std::string_view bytes, const std::string& origin) {
    const auto fail = [&](const std::string& why) { throw FormatError(origin + ": " + why); };
    constexpr std::size_t header = 8 + 4 + 4 + 8 + 8;
    if (bytes.size() < header + 8) fail("too short to be an artifact");
    if (bytes.substr(0, 8) != kArtifactMagic) fail("bad magic bytes (not an artifact file)");
    ByteReader r(bytes.substr(8));
    const auto version = r.u32();
    if (version != kArtifactVersion) fail("unsupported artifact version " + std::to_string(version));
    Container c;
    c.kind = static_cast<ArtifactKind>(r.u32());
    c.config_digest = r.u64();
    const auto len = r.u64();
    if (len != bytes.size() - header - 8) fail("payload length does not match file size (truncated?)");
    const auto stored = ByteReader(bytes.substr(header + len)).u64();
    if (stored != digest(bytes.substr(0, header + len))) fail("checksum mismatch (corrupt artifact)");
    c.payload = std::string(bytes.substr(header, len));
    return c;
}

void save_container(const std::filesystem::path& path, const Container& c) {
    write_file_atomic(path, encode_container(c));
}

Container load_container(const std::filesystem::path& path, ArtifactKind expected) {
    if (!std::filesystem::exists(path)) throw Error("artifact not found: " + path.string());
    auto c = decode_container(read_file(path), path.string());
    if (c.kind != expected)
        throw FormatError(path.string() + ": artifact kind " + std::to_string(static_cast<std::uint32_t>(c.kind)) +
                          ", expected " + std::to_string(static_cast<std::uint32_t>(expected)));
    return c;
}

}  // namespace nids
