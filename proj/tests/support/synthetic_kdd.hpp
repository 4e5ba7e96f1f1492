#pragma once

// Synthetic corpus in the NSL-KDD text format. Each category has its own
// traffic profile with overlapping noise, so detectors can learn something
// without the task being trivial.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "nids/common.hpp"
#include "nids/dataset.hpp"
#include "nids/preprocess.hpp"
#include "nids/rng.hpp"

namespace nids::testing {

struct SyntheticCounts {
    std::size_t normal = 400, dos = 300, probe = 120, r2l = 60, u2r = 24;
};

inline std::string synthetic_row(AttackCategory c, Rng& rng) {
    static const std::array<std::vector<std::string>, 5> attacks{{{"normal"},
                                                                  {"neptune", "smurf", "back"},
                                                                  {"portsweep", "satan", "ipsweep"},
                                                                  {"guess_passwd", "warezclient", "ftp_write"},
                                                                  {"buffer_overflow", "rootkit", "perl"}}};
    static const std::array<std::vector<std::string>, 5> services{{{"http", "smtp", "domain_u", "ftp_data"},
                                                                   {"private", "http", "ecr_i"},
                                                                   {"private", "eco_i", "other"},
                                                                   {"ftp", "ftp_data", "imap4", "telnet"},
                                                                   {"telnet", "ftp_data", "http"}}};
    static const std::array<std::vector<std::string>, 5> flags{
        {{"SF", "SF", "SF", "S1"}, {"S0", "SF", "REJ"}, {"REJ", "SF", "RSTR"}, {"SF", "RSTO"}, {"SF", "SF", "S3"}}};
    const auto k = index_of(c);
    const auto pick = [&](const std::vector<std::string>& v) { return v[rng.index(v.size())]; };
    // One in eight rows borrows another category's profile to blur boundaries.
    const std::size_t p = rng.index(8) == 0 ? rng.index(5) : k;
    const auto noisy = [&](double mean, double sd, double lo, double hi) {
        return std::clamp(mean + sd * rng.normal(), lo, hi);
    };
    const auto rate = [&](double mean) { return std::round(noisy(mean, 0.15, 0.0, 1.0) * 100) / 100; };
    const auto count = [&](double mean) { return std::round(noisy(mean, mean * 0.3 + 2, 0.0, 511.0)); };

    std::array<double, kNumericCount> v{};
    v[0] = p == 3 ? count(40) : count(1);                       // duration
    v[1] = p == 1 ? 0 : count(p == 0 ? 300 : 120);             // src_bytes
    v[2] = p == 0 ? count(400) : count(5);                     // dst_bytes
    v[3] = 0;                                                  // land
    v[4] = p == 1 && rng.bernoulli(0.2) ? 1 : 0;               // wrong_fragment
    v[5] = 0;                                                  // urgent
    v[6] = p >= 3 ? count(3) : 0;                              // hot
    v[7] = p == 3 ? count(2) : 0;                              // num_failed_logins
    v[8] = p == 0 || p >= 3 ? 1 : 0;                           // logged_in
    v[9] = p == 4 ? count(2) : 0;                              // num_compromised
    v[10] = p == 4 && rng.bernoulli(0.8) ? 1 : 0;              // root_shell
    v[11] = 0;                                                 // su_attempted
    v[12] = p == 4 ? count(1) : 0;                             // num_root
    v[13] = p == 4 ? count(2) : 0;                             // num_file_creations
    v[14] = p == 4 && rng.bernoulli(0.5) ? 1 : 0;              // num_shells
    v[15] = p == 3 ? count(1) : 0;                             // num_access_files
    v[16] = 0;                                                 // num_outbound_cmds
    v[17] = 0;                                                 // is_host_login
    v[18] = p == 3 && rng.bernoulli(0.4) ? 1 : 0;              // is_guest_login
    v[19] = count(p == 1 ? 200 : p == 2 ? 60 : 8);             // count
    v[20] = count(p == 1 ? 20 : 8);                            // srv_count
    v[21] = rate(p == 1 ? 0.9 : 0.05);                         // serror_rate
    v[22] = rate(p == 1 ? 0.9 : 0.05);                         // srv_serror_rate
    v[23] = rate(p == 2 ? 0.7 : 0.05);                         // rerror_rate
    v[24] = rate(p == 2 ? 0.7 : 0.05);                         // srv_rerror_rate
    v[25] = rate(p == 0 ? 0.95 : p == 1 ? 0.1 : 0.5);          // same_srv_rate
    v[26] = rate(p == 2 ? 0.6 : 0.05);                         // diff_srv_rate
    v[27] = rate(p == 2 ? 0.3 : 0.1);                          // srv_diff_host_rate
    v[28] = count(p == 0 ? 150 : 250);                         // dst_host_count
    v[29] = count(p == 0 ? 200 : p >= 3 ? 30 : 15);            // dst_host_srv_count
    v[30] = rate(p == 0 ? 0.9 : 0.15);                         // dst_host_same_srv_rate
    v[31] = rate(p == 2 ? 0.7 : 0.05);                         // dst_host_diff_srv_rate
    v[32] = rate(p == 2 ? 0.6 : p >= 3 ? 0.4 : 0.05);          // dst_host_same_src_port_rate
    v[33] = rate(p == 4 ? 0.3 : 0.05);                         // dst_host_srv_diff_host_rate
    v[34] = rate(p == 1 ? 0.9 : 0.05);                         // dst_host_serror_rate
    v[35] = rate(p == 1 ? 0.9 : 0.05);                         // dst_host_srv_serror_rate
    v[36] = rate(p == 2 ? 0.6 : 0.05);                         // dst_host_rerror_rate
    v[37] = rate(p == 2 ? 0.6 : 0.05);                         // dst_host_srv_rerror_rate

    static const std::array<std::string, 3> protocols{"tcp", "udp", "icmp"};
    const std::string protocol = p == 2 && rng.bernoulli(0.3) ? "icmp" : protocols[rng.bernoulli(0.85) ? 0 : 1 + rng.index(2)];

    std::string line = format_double(v[0]) + "," + protocol + "," + pick(services[p]) + "," + pick(flags[p]);
    for (std::size_t i = 1; i < kNumericCount; ++i) line += "," + format_double(v[i]);
    line += "," + pick(attacks[k]) + "," + std::to_string(rng.index(22));
    return line;
}

// Rows are emitted in a seeded random order.
inline std::string synthetic_corpus(const SyntheticCounts& n, std::uint64_t seed) {
    std::vector<AttackCategory> order;
    const std::array<std::size_t, 5> counts{n.normal, n.dos, n.probe, n.r2l, n.u2r};
    for (std::size_t k = 0; k < 5; ++k) order.insert(order.end(), counts[k], kAllCategories[k]);
    Rng rng(seed);
    rng.shuffle(order);
    std::string out;
    for (auto c : order) out += synthetic_row(c, rng) + "\n";
    return out;
}

struct SyntheticData {
    LabeledDataset dataset;
    PreprocessState state;
    FeatureMatrix x;
};

inline SyntheticData synthetic_data(const SyntheticCounts& n, std::uint64_t seed) {
    SyntheticData d;
    d.dataset = parse_nslkdd_text(synthetic_corpus(n, seed), AttackMap::canonical(), {DatasetSource::Train});
    const LabeledDataset* sources[] = {&d.dataset};
    d.state = fit_preprocess(d.dataset, sources);
    d.x = d.state.transform(d.dataset);
    return d;
}

}  // namespace nids::testing
