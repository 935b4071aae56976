#pragma once

#include "idfalign/geometry.hpp"
#include "idfalign/image.hpp"
#include "idfalign/image_io.hpp"
#include "idfalign/random.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <memory>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace idfalign {

struct AnnotatedSample
{
    std::shared_ptr<const Image> image;
    Shape truth;
    BoundingBox box;
    std::string source;
};

class PtsParseError : public std::runtime_error
{
public:
    PtsParseError(std::size_t line, const std::string& what)
        : std::runtime_error("pts line " + std::to_string(line) + ": " + what), line_(line)
    {
    }
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

namespace detail {

inline std::string_view trim(std::string_view s)
{
    const auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; };
    while (!s.empty() && is_space(s.front()))
        s.remove_prefix(1);
    while (!s.empty() && is_space(s.back()))
        s.remove_suffix(1);
    return s;
}

inline bool parse_double(std::string_view token, double& out)
{
    if (!token.empty() && token.front() == '+')
        token.remove_prefix(1);
    const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), out);
    return ec == std::errc{} && ptr == token.data() + token.size() && std::isfinite(out);
}

inline std::vector<std::string_view> split_ws(std::string_view s)
{
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && (s[i] == ' ' || s[i] == '\t'))
            ++i;
        const std::size_t start = i;
        while (i < s.size() && s[i] != ' ' && s[i] != '\t')
            ++i;
        if (i > start)
            out.push_back(s.substr(start, i - start));
    }
    return out;
}

inline std::string format_double(double v)
{
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

} // namespace detail

/// Parses the `.pts` landmark format:
///
///     version: 1
///     n_points: 68
///     {
///     x y
///     ...
///     }
inline std::vector<Vec2> parse_pts(std::string_view text)
{
    std::vector<std::string_view> lines;
    for (std::size_t start = 0; start <= text.size();) {
        std::size_t end = text.find('\n', start);
        if (end == std::string_view::npos)
            end = text.size();
        lines.push_back(text.substr(start, end - start));
        start = end + 1;
    }

    std::size_t i = 0;
    long declared = -1;
    for (; i < lines.size(); ++i) {
        const std::string_view line = detail::trim(lines[i]);
        if (line.empty())
            continue;
        if (line == "{")
            break;
        const std::size_t colon = line.find(':');
        if (colon == std::string_view::npos)
            throw PtsParseError(i + 1, "expected 'key: value' header or '{', got '" + std::string(line) + "'");
        const std::string_view key = detail::trim(line.substr(0, colon));
        const std::string_view value = detail::trim(line.substr(colon + 1));
        if (key == "n_points") {
            double v = 0;
            if (!detail::parse_double(value, v) || v < 0 || v != std::floor(v))
                throw PtsParseError(i + 1, "invalid n_points value '" + std::string(value) + "'");
            declared = static_cast<long>(v);
        }
    }
    if (i == lines.size())
        throw PtsParseError(lines.size(), "missing opening '{'");
    if (declared < 0)
        throw PtsParseError(i + 1, "missing n_points header before '{'");

    std::vector<Vec2> points;
    points.reserve(static_cast<std::size_t>(declared));
    bool closed = false;
    for (++i; i < lines.size(); ++i) {
        const std::string_view line = detail::trim(lines[i]);
        if (line.empty())
            continue;
        if (line == "}") {
            closed = true;
            break;
        }
        const auto tokens = detail::split_ws(line);
        Vec2 p;
        if (tokens.size() != 2 || !detail::parse_double(tokens[0], p.x) || !detail::parse_double(tokens[1], p.y))
            throw PtsParseError(i + 1, "expected two numeric coordinates, got '" + std::string(line) + "'");
        points.push_back(p);
    }
    if (!closed)
        throw PtsParseError(lines.size(), "missing closing '}'");
    if (points.size() != static_cast<std::size_t>(declared))
        throw PtsParseError(i + 1, "n_points declares " + std::to_string(declared) + " points but found " +
                                       std::to_string(points.size()));
    for (++i; i < lines.size(); ++i)
        if (!detail::trim(lines[i]).empty())
            throw PtsParseError(i + 1, "unexpected content after closing '}'");
    return points;
}

/// Shortest round-trip decimal representation, so parse_pts recovers the exact doubles.
inline std::string write_pts(std::span<const Vec2> points)
{
    std::string out = "version: 1\nn_points: " + std::to_string(points.size()) + "\n{\n";
    for (Vec2 p : points)
        out += detail::format_double(p.x) + ' ' + detail::format_double(p.y) + '\n';
    out += "}\n";
    return out;
}

inline std::string read_text_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_text_file(const std::string& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot open '" + path + "' for writing");
    out << text;
    if (!out)
        throw std::runtime_error("failed writing '" + path + "'");
}

inline Shape load_pts(const std::string& path)
{
    try {
        return Shape(parse_pts(read_text_file(path)));
    } catch (const PtsParseError& e) {
        throw std::runtime_error(path + ": " + e.what());
    }
}

/// Tight box grown by padding_fraction of its size on every side.
inline BoundingBox derive_bbox(std::span<const Vec2> points, double padding_fraction)
{
    if (points.empty())
        throw std::invalid_argument("derive_bbox: no points");
    if (!(padding_fraction >= 0.0))
        throw std::invalid_argument("derive_bbox: padding must be non-negative");
    BoundingBox b = bounding_box(points);
    const double px = padding_fraction * b.width;
    const double py = padding_fraction * b.height;
    return {b.x - px, b.y - py, b.width + 2 * px, b.height + 2 * py};
}

inline constexpr double kDefaultBoxPadding = 0.05;

// ---------------------------------------------------------------------------
// Synthetic faces

struct SyntheticConfig
{
    std::size_t samples = 200;
    std::size_t landmark_count = 68;
    int image_size = 128;
    double face_scale = 0.55;        // template unit -> fraction of image size
    double scale_jitter = 0.10;      // uniform in [1 - j, 1 + j]
    double rotation_jitter = 0.20;   // radians, uniform in [-j, j]
    double translation_jitter = 0.05; // fraction of image size, uniform in [-j, j]
    double landmark_noise = 1.0;     // pixels, Gaussian std
    double blob_sigma = 2.5;         // pixels
    double background = 40.0;
    double background_noise = 6.0;
    std::uint64_t seed = 1;

    void validate() const
    {
        if (samples == 0 || landmark_count < 2 || image_size < 8)
            throw std::invalid_argument("synthetic config: counts and sizes must be positive");
        if (!(face_scale > 0) || !(blob_sigma > 0))
            throw std::invalid_argument("synthetic config: face scale and blob sigma must be positive");
        if (scale_jitter < 0 || scale_jitter >= 1 || rotation_jitter < 0 || translation_jitter < 0 ||
            landmark_noise < 0 || background_noise < 0)
            throw std::invalid_argument("synthetic config: jitter ranges must be non-negative (scale below 1)");
    }
};

/// Canonical face template centred on the origin, roughly unit width, y down.
/// 68 landmarks follow the usual jaw/brows/nose/eyes/mouth markup order.
inline Shape synthetic_template(std::size_t landmark_count)
{
    using std::numbers::pi;
    std::vector<Vec2> p;
    auto arc = [&](Vec2 c, Vec2 r, double from, double to, std::size_t n, bool closed) {
        for (std::size_t i = 0; i < n; ++i) {
            const double t = closed ? static_cast<double>(i) / n : static_cast<double>(i) / (n - 1);
            const double a = from + (to - from) * t;
            p.push_back({c.x + r.x * std::cos(a), c.y + r.y * std::sin(a)});
        }
    };
    if (landmark_count != 68) {
        arc({0, 0}, {0.45, 0.55}, 0, 2 * pi, landmark_count, true);
        return Shape(std::move(p));
    }
    arc({0, -0.05}, {0.46, 0.55}, pi + 0.15, -0.15, 17, false);   // jaw 0-16
    arc({-0.22, -0.28}, {0.14, 0.05}, pi, 2 * pi, 5, false);      // left brow 17-21
    arc({0.22, -0.28}, {0.14, 0.05}, pi, 2 * pi, 5, false);       // right brow 22-26
    for (int i = 0; i < 4; ++i)                                   // nose bridge 27-30
        p.push_back({0.0, -0.18 + 0.08 * i});
    for (int i = 0; i < 5; ++i)                                   // nostrils 31-35
        p.push_back({-0.1 + 0.05 * i, 0.12 + (i == 2 ? 0.02 : 0.0)});
    arc({-0.2, -0.15}, {0.08, 0.035}, pi, 3 * pi, 6, true);       // left eye 36-41
    arc({0.2, -0.15}, {0.08, 0.035}, pi, 3 * pi, 6, true);        // right eye 42-47
    arc({0.0, 0.3}, {0.2, 0.08}, pi, 3 * pi, 12, true);           // outer lips 48-59
    arc({0.0, 0.3}, {0.12, 0.03}, pi, 3 * pi, 8, true);           // inner lips 60-67
    return Shape(std::move(p));
}

/// Fixed, distinct peak intensity per landmark.
inline double synthetic_peak(std::size_t landmark, std::size_t landmark_count)
{
    return 90.0 + 160.0 * static_cast<double>(landmark) / static_cast<double>(landmark_count - 1);
}

inline AnnotatedSample generate_synthetic_sample(const SyntheticConfig& config, std::size_t index)
{
    Rng rng = make_rng(config.seed, SeedTag::Synthetic, {index});
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);

    const double size = static_cast<double>(config.image_size);
    SimilarityTransform pose;
    pose.scale = size * config.face_scale * (1.0 + config.scale_jitter * unit(rng));
    pose.rotation = config.rotation_jitter * unit(rng);
    pose.translation = {size / 2 + config.translation_jitter * size * unit(rng),
                        size / 2 + config.translation_jitter * size * unit(rng)};

    const Shape tmpl = synthetic_template(config.landmark_count);
    Shape truth = pose.apply(tmpl);
    for (auto& q : truth.points) {
        const double nx = gauss(rng), ny = gauss(rng);
        q = q + Vec2{config.landmark_noise * nx, config.landmark_noise * ny};
    }

    const int w = config.image_size;
    std::vector<double> canvas(static_cast<std::size_t>(w) * w);
    for (auto& v : canvas)
        v = config.background + config.background_noise * gauss(rng);
    const int reach = static_cast<int>(std::ceil(3.0 * config.blob_sigma));
    const double inv2s2 = 1.0 / (2.0 * config.blob_sigma * config.blob_sigma);
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const double peak = synthetic_peak(i, truth.size());
        const int cx = static_cast<int>(std::lround(truth[i].x));
        const int cy = static_cast<int>(std::lround(truth[i].y));
        for (int y = std::max(0, cy - reach); y <= std::min(w - 1, cy + reach); ++y)
            for (int x = std::max(0, cx - reach); x <= std::min(w - 1, cx + reach); ++x) {
                const double dx = x - truth[i].x, dy = y - truth[i].y;
                const double g = std::exp(-(dx * dx + dy * dy) * inv2s2);
                double& v = canvas[static_cast<std::size_t>(y) * w + x];
                v = std::max(v, config.background + (peak - config.background) * g);
            }
    }
    std::vector<std::uint8_t> px(canvas.size());
    for (std::size_t i = 0; i < canvas.size(); ++i)
        px[i] = static_cast<std::uint8_t>(std::clamp(std::lround(canvas[i]), 0L, 255L));

    AnnotatedSample s;
    s.image = std::make_shared<const Image>(w, w, std::move(px));
    s.box = derive_bbox(truth.points, kDefaultBoxPadding);
    s.truth = std::move(truth);
    s.source = "synthetic";
    return s;
}

/// Deterministic in (config, seed); sample i depends only on i.
inline std::vector<AnnotatedSample> generate_synthetic(const SyntheticConfig& config)
{
    config.validate();
    std::vector<AnnotatedSample> out;
    out.reserve(config.samples);
    for (std::size_t i = 0; i < config.samples; ++i)
        out.push_back(generate_synthetic_sample(config, i));
    return out;
}

// ---------------------------------------------------------------------------
// Manifests

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line)
{
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(std::string(trim(cur)));
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(std::string(trim(cur)));
    return out;
}

inline AnnotatedSample load_sample(const std::filesystem::path& image, const std::filesystem::path& pts,
                                   double padding, const std::string& source)
{
    AnnotatedSample s;
    s.image = std::make_shared<const Image>(load_image(image.string()));
    s.truth = load_pts(pts.string());
    if (s.truth.size() == 0)
        throw std::runtime_error(pts.string() + ": no landmarks");
    s.box = derive_bbox(s.truth.points, padding);
    s.source = source;
    return s;
}

} // namespace detail

/// Loads a dataset from either a directory (image files with same-stem
/// `.pts` files beside them) or a CSV manifest with header
/// `image_path,pts_path` and optional `box_x,box_y,box_w,box_h` columns.
/// Relative CSV paths resolve against the manifest's directory.
inline std::vector<AnnotatedSample> load_dataset(const std::string& location, double padding = kDefaultBoxPadding)
{
    namespace fs = std::filesystem;
    const fs::path root(location);
    std::vector<AnnotatedSample> out;
    if (fs::is_directory(root)) {
        std::vector<fs::path> images;
        for (const auto& entry : fs::directory_iterator(root)) {
            const std::string ext = entry.path().extension().string();
            if (entry.is_regular_file() && (ext == ".png" || ext == ".pgm" || ext == ".PNG" || ext == ".PGM"))
                images.push_back(entry.path());
        }
        std::sort(images.begin(), images.end());
        for (const auto& img : images) {
            fs::path pts = img;
            pts.replace_extension(".pts");
            if (fs::exists(pts))
                out.push_back(detail::load_sample(img, pts, padding, root.filename().string()));
        }
        if (out.empty())
            throw std::runtime_error("no image/.pts pairs found in '" + location + "'");
        return out;
    }

    std::ifstream in(root);
    if (!in)
        throw std::runtime_error("cannot open manifest '" + location + "'");
    std::string line;
    if (!std::getline(in, line))
        throw std::runtime_error("empty manifest '" + location + "'");
    const auto header = detail::split_csv_line(line);
    auto column = [&](const std::string& name) -> long {
        const auto it = std::find(header.begin(), header.end(), name);
        return it == header.end() ? -1 : static_cast<long>(it - header.begin());
    };
    const long ci = column("image_path"), cp = column("pts_path");
    const long bx = column("box_x"), by = column("box_y"), bw = column("box_w"), bh = column("box_h");
    if (ci < 0 || cp < 0)
        throw std::runtime_error("manifest '" + location + "' needs image_path and pts_path columns");
    const bool has_box = bx >= 0 && by >= 0 && bw >= 0 && bh >= 0;
    const fs::path base = root.parent_path();
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty())
            continue;
        const auto cells = detail::split_csv_line(line);
        auto cell = [&](long c) -> const std::string& {
            if (c >= static_cast<long>(cells.size()))
                throw std::runtime_error("manifest line " + std::to_string(line_no) + ": missing column");
            return cells[static_cast<std::size_t>(c)];
        };
        auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? fs::path(p) : base / p; };
        AnnotatedSample s = detail::load_sample(resolve(cell(ci)), resolve(cell(cp)), padding, root.stem().string());
        if (has_box) {
            BoundingBox b;
            if (!detail::parse_double(cell(bx), b.x) || !detail::parse_double(cell(by), b.y) ||
                !detail::parse_double(cell(bw), b.width) || !detail::parse_double(cell(bh), b.height) || !b.valid())
                throw std::runtime_error("manifest line " + std::to_string(line_no) + ": invalid box");
            s.box = b;
        }
        out.push_back(std::move(s));
    }
    if (out.empty())
        throw std::runtime_error("manifest '" + location + "' lists no samples");
    return out;
}

/// Writes NNNNN.pgm / NNNNN.pts pairs plus manifest.csv into `dir`.
inline void write_dataset(const std::string& dir, const std::vector<AnnotatedSample>& samples)
{
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    std::string manifest = "image_path,pts_path,box_x,box_y,box_w,box_h\n";
    for (std::size_t i = 0; i < samples.size(); ++i) {
        char stem[16];
        std::snprintf(stem, sizeof stem, "%05zu", i);
        const std::string img = std::string(stem) + ".pgm";
        const std::string pts = std::string(stem) + ".pts";
        write_pgm((fs::path(dir) / img).string(), *samples[i].image);
        write_text_file((fs::path(dir) / pts).string(), write_pts(samples[i].truth.points));
        const BoundingBox& b = samples[i].box;
        manifest += img + ',' + pts + ',' + detail::format_double(b.x) + ',' + detail::format_double(b.y) + ',' +
                    detail::format_double(b.width) + ',' + detail::format_double(b.height) + '\n';
    }
    write_text_file((fs::path(dir) / "manifest.csv").string(), manifest);
}

} // namespace idfalign
