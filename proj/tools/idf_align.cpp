// idf_align: train, fit, evaluate and benchmark cascaded random-forest face
// alignment models. Run `idf_align --help` for the subcommand list.

#include "idfalign/idfalign.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

using namespace idfalign;

namespace {

struct SynthSpec
{
    SyntheticConfig config;
    std::size_t offset = 0;
};

/// "n=200,seed=3,offset=0,size=128,noise=1,rot=0.2,scale=0.1,trans=0.05,sigma=2.5,bgnoise=6,landmarks=68"
SynthSpec parse_synth_spec(const std::string& text, std::uint64_t default_seed)
{
    SynthSpec spec;
    spec.config.seed = default_seed;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty())
            continue;
        const auto eq = item.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("--synth: expected key=value, got '" + item + "'");
        const std::string key = item.substr(0, eq);
        const std::string value = item.substr(eq + 1);
        std::size_t used = 0;
        const double v = std::stod(value, &used);
        if (used != value.size())
            throw std::invalid_argument("--synth: bad number '" + value + "' for " + key);
        auto count = [&] {
            if (v < 0 || v != static_cast<double>(static_cast<std::uint64_t>(v)))
                throw std::invalid_argument("--synth: " + key + " must be a non-negative integer");
            return static_cast<std::uint64_t>(v);
        };
        if (key == "n")
            spec.config.samples = count();
        else if (key == "seed")
            spec.config.seed = count();
        else if (key == "offset")
            spec.offset = count();
        else if (key == "size")
            spec.config.image_size = static_cast<int>(count());
        else if (key == "landmarks")
            spec.config.landmark_count = count();
        else if (key == "noise")
            spec.config.landmark_noise = v;
        else if (key == "rot")
            spec.config.rotation_jitter = v;
        else if (key == "scale")
            spec.config.scale_jitter = v;
        else if (key == "trans")
            spec.config.translation_jitter = v;
        else if (key == "sigma")
            spec.config.blob_sigma = v;
        else if (key == "bgnoise")
            spec.config.background_noise = v;
        else
            throw std::invalid_argument("--synth: unknown key '" + key + "'");
    }
    spec.config.validate();
    return spec;
}

std::vector<AnnotatedSample> synth_samples(const SynthSpec& spec)
{
    std::vector<AnnotatedSample> out;
    out.reserve(spec.config.samples);
    for (std::size_t i = 0; i < spec.config.samples; ++i)
        out.push_back(generate_synthetic_sample(spec.config, spec.offset + i));
    return out;
}

struct DataOptions
{
    std::string data;
    std::string synth;
    double padding = kDefaultBoxPadding;

    void add(CLI::App* app)
    {
        app->add_option("--data", data, "Dataset directory (image + .pts pairs) or CSV manifest");
        app->add_option("--synth", synth, "Synthetic dataset spec, e.g. n=200,seed=3,offset=0");
        app->add_option("--box-padding", padding, "Padding fraction for boxes derived from landmarks");
    }

    std::vector<AnnotatedSample> load(std::uint64_t seed) const
    {
        if (data.empty() == synth.empty())
            throw std::invalid_argument("exactly one of --data or --synth is required");
        if (!data.empty())
            return load_dataset(data, padding);
        return synth_samples(parse_synth_spec(synth, seed));
    }
};

struct TrainOptions
{
    std::uint32_t stages = 7;
    std::uint32_t trees = 11;
    std::uint32_t depth = 7;
    std::uint32_t k = 10;
    std::string encoding = "idf";
    bool achievable_range = false;
    double lambda = 1.0;
    std::uint32_t candidates = kDefaultCandidateCount;
    std::uint32_t candidates_per_node = 50;
    std::uint32_t inits = 5;
    std::size_t clusters = 7;
    std::size_t init_count = 50;
    double bagging = 0.8;
    std::vector<double> radii;

    void add(CLI::App* app)
    {
        app->add_option("--stages", stages, "Cascade stages T")->capture_default_str();
        app->add_option("--trees", trees, "Trees per landmark forest t")->capture_default_str();
        app->add_option("--depth", depth, "Tree depth d")->capture_default_str();
        app->add_option("--k", k, "IDF magnitude value k")->capture_default_str();
        app->add_option("--encoding", encoding, "idf | lbf | index")->capture_default_str();
        app->add_flag("--achievable-range", achievable_range, "Normalize IDF by the achievable leaf range");
        app->add_option("--lambda", lambda, "Ridge penalty")->capture_default_str();
        app->add_option("--candidates", candidates, "Candidate pixels per landmark per stage")->capture_default_str();
        app->add_option("--proposals", candidates_per_node, "Split proposals per node")->capture_default_str();
        app->add_option("--inits", inits, "Training initializations per sample")->capture_default_str();
        app->add_option("--clusters", clusters, "Shape clusters for initialization")->capture_default_str();
        app->add_option("--init-count", init_count, "Initialization shapes kept in the model")->capture_default_str();
        app->add_option("--bagging", bagging, "Per-tree bagging fraction")->capture_default_str();
        app->add_option("--radii", radii, "Per-stage sampling radii (defaults to the standard schedule)")
            ->delimiter(',');
    }

    CascadeConfig config(std::size_t landmarks, std::uint64_t seed) const
    {
        CascadeConfig c;
        c.set_stages(stages);
        if (!radii.empty())
            c.radii = RadiusSchedule(radii);
        c.landmarks = static_cast<std::uint32_t>(landmarks);
        c.forest.trees = trees;
        c.forest.depth = depth;
        c.forest.candidates_per_node = candidates_per_node;
        c.forest.bagging_fraction = bagging;
        c.idf.k = k;
        c.idf.range_mode = achievable_range ? IdfRangeMode::Achievable : IdfRangeMode::Conventional;
        c.encoding = parse_encoding(encoding);
        c.ridge_lambda = lambda;
        c.candidates = candidates;
        c.train_inits_per_sample = inits;
        c.seed = seed;
        c.validate();
        return c;
    }

    InitConfig init_config() const
    {
        InitConfig ic;
        ic.clusters = clusters;
        ic.count = init_count;
        return ic;
    }
};

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag)
{
    if (flag)
        return *flag;
    if (const char* env = std::getenv("IDF_ALIGN_SEED")) {
        std::size_t used = 0;
        const std::string s(env);
        const unsigned long long v = std::stoull(s, &used);
        if (used != s.size())
            throw std::invalid_argument("IDF_ALIGN_SEED is not an integer: '" + s + "'");
        return v;
    }
    return 0;
}

std::size_t landmark_count_of(const std::vector<AnnotatedSample>& data)
{
    if (data.empty())
        throw std::invalid_argument("dataset is empty");
    return data.front().truth.size();
}

/// Shapes after 0..T stages from the mean shape, or the per-stage median over
/// all stored initializations when multi_init is set.
std::vector<Shape> stage_predictions(const CascadeModel& model, const AnnotatedSample& s, bool multi_init)
{
    if (!multi_init || model.init.size() == 0)
        return fit_trajectory(model, *s.image, denormalize_from_box(model.mean_shape, s.box));
    std::vector<std::vector<Shape>> runs;
    for (const Shape& init : model.init.shapes)
        runs.push_back(fit_trajectory(model, *s.image, denormalize_from_box(init, s.box)));
    std::vector<Shape> out;
    for (std::size_t t = 0; t < runs.front().size(); ++t) {
        std::vector<Shape> at;
        for (const auto& r : runs)
            at.push_back(r[t]);
        out.push_back(coordinate_median(at));
    }
    return out;
}

/// Mean error after 0..T stages over a dataset.
std::vector<double> per_stage_errors(const CascadeModel& model, const std::vector<AnnotatedSample>& data,
                                     NormalizationKind norm, bool multi_init,
                                     std::vector<double>* per_landmark = nullptr)
{
    std::vector<double> errors(model.stages.size() + 1, 0.0);
    if (per_landmark)
        per_landmark->assign(model.config.landmarks, 0.0);
    for (const AnnotatedSample& s : data) {
        const auto traj = stage_predictions(model, s, multi_init);
        for (std::size_t t = 0; t < traj.size(); ++t)
            errors[t] += alignment_error(traj[t], s.truth, norm);
        if (per_landmark) {
            const auto le = landmark_errors(traj.back(), s.truth, norm);
            for (std::size_t j = 0; j < le.size(); ++j)
                (*per_landmark)[j] += le[j];
        }
    }
    for (double& e : errors)
        e /= static_cast<double>(data.size());
    if (per_landmark)
        for (double& e : *per_landmark)
            e /= static_cast<double>(data.size());
    return errors;
}

RgbImage overlay(const Image& image, const Shape& shape)
{
    RgbImage out{image.width, image.height, {}};
    out.pixels.resize(static_cast<std::size_t>(image.width) * image.height * 3);
    for (std::size_t i = 0; i < image.pixels.size(); ++i)
        for (int c = 0; c < 3; ++c)
            out.pixels[3 * i + c] = image.pixels[i];
    for (Vec2 p : shape.points) {
        const int cx = static_cast<int>(std::lround(p.x));
        const int cy = static_cast<int>(std::lround(p.y));
        for (int y = cy - 1; y <= cy + 1; ++y)
            for (int x = cx - 1; x <= cx + 1; ++x) {
                if (x < 0 || y < 0 || x >= image.width || y >= image.height)
                    continue;
                std::uint8_t* px = &out.pixels[3 * (static_cast<std::size_t>(y) * image.width + x)];
                px[0] = 255;
                px[1] = 0;
                px[2] = 0;
            }
    }
    return out;
}

CsvTable dimension_table(const CascadeConfig& c, std::size_t init_count)
{
    const DimensionReport d = report_dimensions(c, init_count);
    CsvTable t({"encoding", "landmarks", "trees", "depth", "stages", "feature_dim", "linear_weight_count",
                "linear_parameter_count", "forest_node_count", "parameter_count", "model_bytes"});
    t.add_row({to_string(c.encoding), CsvTable::number(std::size_t{c.landmarks}),
               CsvTable::number(std::size_t{c.forest.trees}), CsvTable::number(std::size_t{c.forest.depth}),
               CsvTable::number(std::size_t{c.stages}), CsvTable::number(d.feature_dim),
               CsvTable::number(d.linear_weight_count), CsvTable::number(d.linear_parameter_count),
               CsvTable::number(d.forest_node_count), CsvTable::number(d.parameter_count),
               CsvTable::number(d.estimated_bytes)});
    return t;
}

// ---------------------------------------------------------------------------

int cmd_train(const DataOptions& data, const TrainOptions& opts, std::optional<std::uint64_t> seed_flag,
              const std::string& out_path, std::string report_path, unsigned threads)
{
    const std::uint64_t seed = resolve_seed(seed_flag);
    const auto samples = data.load(seed);
    const CascadeConfig config = opts.config(landmark_count_of(samples), seed);
    const TrainResult result = train_cascade(samples, config, opts.init_config(), ExecutionOptions{threads});
    save_model(out_path, result.model);

    const DimensionReport dims = report_dimensions(config, result.model.init.size());
    CsvTable report({"stage", "train_error", "encoding", "feature_dim", "parameter_count", "model_bytes", "seed"});
    for (std::size_t t = 0; t < result.stage_errors.size(); ++t)
        report.add_row({CsvTable::number(t), CsvTable::number(result.stage_errors[t]), to_string(config.encoding),
                        CsvTable::number(dims.feature_dim), CsvTable::number(dims.parameter_count),
                        CsvTable::number(dims.estimated_bytes), std::to_string(seed)});
    if (report_path.empty())
        report_path = out_path + ".train.csv";
    report.save(report_path);

    std::cout << "trained " << config.stages << " stages on " << samples.size() << " samples ("
              << to_string(config.encoding) << ", feature_dim " << dims.feature_dim << ")\n";
    for (std::size_t t = 0; t < result.stage_errors.size(); ++t)
        std::cout << "  stage " << t << "  train error " << result.stage_errors[t] << '\n';
    std::cout << "model: " << out_path << "\nreport: " << report_path << '\n';
    return 0;
}

int cmd_fit(const std::string& model_path, const std::string& image_path, const std::vector<double>& box_flag,
            const std::string& pts_path, double padding, const std::string& out_path, const std::string& overlay_path,
            bool multi_init)
{
    const CascadeModel model = load_model(model_path);
    const Image image = load_image(image_path);
    BoundingBox box;
    if (!box_flag.empty()) {
        if (box_flag.size() != 4)
            throw std::invalid_argument("--box expects x,y,w,h");
        box = {box_flag[0], box_flag[1], box_flag[2], box_flag[3]};
    } else if (!pts_path.empty()) {
        box = derive_bbox(load_pts(pts_path).points, padding);
    } else {
        throw std::invalid_argument("fit needs --box or --pts (no face detector is included)");
    }
    const Shape shape = fit(model, image, box, multi_init);
    write_text_file(out_path, write_pts(shape.points));
    if (!overlay_path.empty())
        write_png(overlay_path, overlay(image, shape));
    std::cout << "wrote " << shape.size() << " landmarks to " << out_path << '\n';
    return 0;
}

int cmd_eval(const std::vector<std::string>& model_paths, const DataOptions& data,
             std::optional<std::uint64_t> seed_flag, const std::string& norm_name, bool multi_init,
             const std::string& out_path, const std::string& landmark_path)
{
    const NormalizationKind norm = parse_normalization(norm_name);
    const std::uint64_t seed = resolve_seed(seed_flag);
    const auto samples = data.load(seed);
    std::vector<CascadeModel> models;
    for (const auto& p : model_paths)
        models.push_back(load_model(p));

    std::vector<std::string> columns{"stage"};
    std::map<std::string, int> seen;
    for (const auto& p : model_paths) {
        std::string name = std::filesystem::path(p).stem().string();
        if (seen[name]++ > 0)
            name += "_" + std::to_string(seen[name] - 1);
        columns.push_back(name);
    }
    std::size_t max_stages = 0;
    for (const auto& m : models)
        max_stages = std::max<std::size_t>(max_stages, m.stages.size());

    std::vector<std::vector<double>> errors;
    std::vector<std::vector<double>> landmarks(models.size());
    for (std::size_t i = 0; i < models.size(); ++i) {
        for (const auto& s : samples)
            if (s.truth.size() != models[i].config.landmarks)
                throw std::invalid_argument("ground truth landmark count does not match model");
        errors.push_back(per_stage_errors(models[i], samples, norm, multi_init, &landmarks[i]));
    }

    CsvTable table(columns);
    for (std::size_t t = 0; t <= max_stages; ++t) {
        std::vector<std::string> row{std::to_string(t)};
        for (const auto& e : errors)
            row.push_back(t < e.size() ? CsvTable::number(e[t]) : std::string());
        table.add_row(std::move(row));
    }
    table.save(out_path);

    if (!landmark_path.empty()) {
        std::vector<std::string> lcols{"landmark"};
        lcols.insert(lcols.end(), columns.begin() + 1, columns.end());
        CsvTable lt(lcols);
        for (std::size_t j = 0; j < landmarks.front().size(); ++j) {
            std::vector<std::string> row{std::to_string(j)};
            for (const auto& l : landmarks)
                row.push_back(j < l.size() ? CsvTable::number(l[j]) : std::string());
            lt.add_row(std::move(row));
        }
        lt.save(landmark_path);
    }

    std::cout << "evaluated " << samples.size() << " samples, " << to_string(norm) << " normalization\n";
    for (std::size_t i = 0; i < models.size(); ++i)
        std::cout << "  " << model_paths[i] << ": stage-0 " << errors[i].front() << " -> final " << errors[i].back()
                  << '\n';
    return 0;
}

int cmd_bench(const std::string& idf_path, const std::string& lbf_path, const DataOptions& data,
              std::optional<std::uint64_t> seed_flag, std::size_t reps, bool parallel, const std::string& out_path)
{
    const CascadeModel idf = load_model(idf_path);
    const CascadeModel lbf = load_model(lbf_path);
    if (idf.config.encoding != EncodingKind::IDF || lbf.config.encoding != EncodingKind::LBF)
        throw std::invalid_argument("bench: --idf needs an IDF model and --lbf an LBF model");
    CascadeConfig a = idf.config, b = lbf.config;
    a.encoding = b.encoding = EncodingKind::IDF;
    a.idf = b.idf; // IDF parameters are irrelevant to LBF models
    if (!(a == b))
        throw std::invalid_argument("bench: models differ in configuration other than encoding");

    std::vector<std::string> columns{"encoding", "feature_dim", "linear_weight_count", "parameter_count",
                                     "model_bytes"};
    if (reps > 0) {
        columns.push_back("images_per_second");
        columns.push_back("microseconds_per_image");
    }
    CsvTable table(columns);

    std::vector<AnnotatedSample> samples;
    if (reps > 0)
        samples = data.load(resolve_seed(seed_flag));
    const ExecutionOptions exec{parallel ? 0u : 1u};

    std::vector<double> throughput;
    for (const auto* m : {&idf, &lbf}) {
        const DimensionReport d = report_dimensions(m->config, m->init.size());
        std::vector<std::string> row{to_string(m->config.encoding), CsvTable::number(d.feature_dim),
                                     CsvTable::number(d.linear_weight_count), CsvTable::number(d.parameter_count),
                                     CsvTable::number(std::filesystem::file_size(m == &idf ? idf_path : lbf_path))};
        if (reps > 0) {
            std::vector<Shape> sink(samples.size());
            auto pass = [&] {
                parallel_for(samples.size(), exec,
                             [&](std::size_t i) { sink[i] = fit(*m, *samples[i].image, samples[i].box); });
            };
            pass(); // warm-up
            const auto t0 = std::chrono::steady_clock::now();
            for (std::size_t r = 0; r < reps; ++r)
                pass();
            const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            const double ips = static_cast<double>(reps * samples.size()) / secs;
            throughput.push_back(ips);
            row.push_back(CsvTable::number(ips));
            row.push_back(CsvTable::number(1e6 / ips));
        }
        table.add_row(std::move(row));
    }
    table.save(out_path);

    const DimensionReport di = report_dimensions(idf.config), dl = report_dimensions(lbf.config);
    std::cout << "feature_dim idf " << di.feature_dim << ", lbf " << dl.feature_dim << " (ratio "
              << static_cast<double>(dl.linear_weight_count) / static_cast<double>(di.linear_weight_count) << ")\n";
    if (throughput.size() == 2)
        std::cout << "throughput idf " << throughput[0] << " img/s, lbf " << throughput[1]
                  << " img/s, speed factor " << throughput[0] / throughput[1] << '\n';
    return 0;
}

int cmd_sweep_k(const std::string& synth, const std::string& test_synth, const TrainOptions& base,
                const std::vector<std::uint32_t>& ks, std::optional<std::uint64_t> seed_flag,
                const std::string& norm_name, const std::string& out_path, unsigned threads)
{
    if (ks.empty())
        throw std::invalid_argument("sweep-k: no k values given");
    for (auto k : ks)
        if (k < 2)
            throw std::invalid_argument("sweep-k: every k must be at least 2");
    const NormalizationKind norm = parse_normalization(norm_name);
    const std::uint64_t seed = resolve_seed(seed_flag);
    const SynthSpec train_spec = parse_synth_spec(synth, seed);
    SynthSpec test_spec;
    if (test_synth.empty()) {
        test_spec = train_spec;
        test_spec.offset = train_spec.offset + train_spec.config.samples;
        test_spec.config.samples = std::max<std::size_t>(1, train_spec.config.samples / 4);
    } else {
        test_spec = parse_synth_spec(test_synth, seed);
    }
    const auto train = synth_samples(train_spec);
    const auto test = synth_samples(test_spec);

    CsvTable table({"k", "seed", "baseline_error", "test_error", "train_error"});
    for (auto k : ks) {
        TrainOptions opts = base;
        opts.k = k;
        opts.encoding = "idf";
        const CascadeConfig config = opts.config(landmark_count_of(train), seed);
        const TrainResult result = train_cascade(train, config, opts.init_config(), ExecutionOptions{threads});
        const auto errors = per_stage_errors(result.model, test, norm, false);
        table.add_row({std::to_string(k), std::to_string(seed), CsvTable::number(errors.front()),
                       CsvTable::number(errors.back()), CsvTable::number(result.stage_errors.back())});
        std::cout << "k=" << k << "  test error " << errors.back() << " (baseline " << errors.front() << ")\n";
    }
    table.save(out_path);
    return 0;
}

int cmd_inspect(const std::string& model_path, const TrainOptions& opts, const std::string& out_path)
{
    CsvTable table;
    if (!model_path.empty()) {
        const CascadeModel m = load_model(model_path);
        table = dimension_table(m.config, m.init.size());
        std::cout << "model " << model_path << ": format v" << m.format_version << ", " << m.config.landmarks
                  << " landmarks, " << m.stages.size() << " stages, " << m.init.size() << " init shapes, k "
                  << m.config.idf.k << ", lambda " << m.config.ridge_lambda << ", seed " << m.config.seed << '\n';
    } else {
        CascadeConfig c = opts.config(68, 0);
        table = dimension_table(c, 0);
    }
    if (out_path.empty())
        std::cout << table.str();
    else
        table.save(out_path);
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Cascaded random-forest face alignment with leaf-path (IDF/LBF) encodings"};
    app.require_subcommand(1);

    std::optional<std::uint64_t> seed;
    unsigned threads = 0;
    auto add_seed = [&](CLI::App* sub) {
        sub->add_option("--seed", seed, "Random seed (falls back to IDF_ALIGN_SEED, then 0)");
    };

    // train
    auto* train = app.add_subcommand("train", "Train a cascade and write the model plus a per-stage CSV");
    DataOptions train_data;
    TrainOptions train_opts;
    std::string train_out, train_report;
    train_data.add(train);
    train_opts.add(train);
    add_seed(train);
    train->add_option("-o,--output", train_out, "Model file")->required();
    train->add_option("--report", train_report, "Per-stage CSV (default: <model>.train.csv)");
    train->add_option("--threads", threads, "Worker threads (0 = all cores)");

    // fit
    auto* fitc = app.add_subcommand("fit", "Fit a model to one image");
    std::string fit_model, fit_image, fit_pts, fit_out, fit_overlay;
    std::vector<double> fit_box;
    double fit_padding = kDefaultBoxPadding;
    bool fit_multi = false;
    fitc->add_option("-m,--model", fit_model, "Model file")->required();
    fitc->add_option("--image", fit_image, "PGM or PNG image")->required();
    fitc->add_option("--box", fit_box, "Face box x,y,w,h")->delimiter(',');
    fitc->add_option("--pts", fit_pts, "Derive the face box from this .pts file");
    fitc->add_option("--box-padding", fit_padding, "Padding when deriving the box from --pts");
    fitc->add_option("-o,--output", fit_out, "Output .pts file")->required();
    fitc->add_option("--overlay", fit_overlay, "Write a PNG with the fitted landmarks drawn in");
    fitc->add_flag("--multi-init", fit_multi, "Median over all stored initialization shapes");

    // eval
    auto* eval = app.add_subcommand("eval", "Per-stage and per-landmark error of one or more models");
    std::vector<std::string> eval_models;
    DataOptions eval_data;
    std::string eval_norm = "inter-ocular", eval_out, eval_landmarks;
    bool eval_multi = false;
    eval->add_option("-m,--model", eval_models, "Model file (repeat for a tree-count table)")->required();
    eval_data.add(eval);
    add_seed(eval);
    eval->add_option("--norm", eval_norm, "inter-ocular | inter-pupil | box-diagonal")->capture_default_str();
    eval->add_flag("--multi-init", eval_multi, "Median over all stored initialization shapes");
    eval->add_option("-o,--output", eval_out, "Per-stage CSV")->required();
    eval->add_option("--per-landmark", eval_landmarks, "Per-landmark CSV");

    // bench
    auto* bench = app.add_subcommand("bench", "Compare IDF and LBF models: size and fitting throughput");
    std::string bench_idf, bench_lbf, bench_out;
    DataOptions bench_data;
    std::size_t bench_reps = 3;
    bool bench_parallel = false;
    bench->add_option("--idf", bench_idf, "IDF model")->required();
    bench->add_option("--lbf", bench_lbf, "LBF model")->required();
    bench_data.add(bench);
    add_seed(bench);
    bench->add_option("--reps", bench_reps, "Timed passes over the data (0 = sizes only)")->capture_default_str();
    bench->add_flag("--parallel", bench_parallel, "Fit images on all cores");
    bench->add_option("-o,--output", bench_out, "CSV report")->required();

    // sweep-k
    auto* sweep = app.add_subcommand("sweep-k", "Train one IDF cascade per magnitude value k");
    std::string sweep_synth, sweep_test, sweep_out, sweep_norm = "box-diagonal";
    std::vector<std::uint32_t> sweep_ks;
    TrainOptions sweep_opts;
    sweep->add_option("--synth", sweep_synth, "Training data spec")->required();
    sweep->add_option("--test-synth", sweep_test, "Held-out data spec (default: next n/4 samples)");
    sweep->add_option("--ks", sweep_ks, "Comma-separated k values")->delimiter(',')->required();
    sweep_opts.add(sweep);
    add_seed(sweep);
    sweep->add_option("--norm", sweep_norm, "Error normalization")->capture_default_str();
    sweep->add_option("-o,--output", sweep_out, "CSV report")->required();
    sweep->add_option("--threads", threads, "Worker threads (0 = all cores)");

    // synth
    auto* synth = app.add_subcommand("synth", "Write a synthetic dataset (PGM + .pts + manifest.csv)");
    std::string synth_spec, synth_out;
    synth->add_option("--synth", synth_spec, "Synthetic dataset spec")->required();
    add_seed(synth);
    synth->add_option("-o,--output", synth_out, "Output directory")->required();

    // inspect
    auto* inspect = app.add_subcommand("inspect", "Report feature dimension, parameter count and model size");
    std::string inspect_model, inspect_out;
    TrainOptions inspect_opts;
    inspect->add_option("-m,--model", inspect_model, "Model file (otherwise the config flags are used)");
    inspect_opts.add(inspect);
    inspect->add_option("-o,--output", inspect_out, "CSV output (default: stdout)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*train)
            return cmd_train(train_data, train_opts, seed, train_out, train_report, threads);
        if (*fitc)
            return cmd_fit(fit_model, fit_image, fit_box, fit_pts, fit_padding, fit_out, fit_overlay, fit_multi);
        if (*eval)
            return cmd_eval(eval_models, eval_data, seed, eval_norm, eval_multi, eval_out, eval_landmarks);
        if (*bench)
            return cmd_bench(bench_idf, bench_lbf, bench_data, seed, bench_reps, bench_parallel, bench_out);
        if (*sweep)
            return cmd_sweep_k(sweep_synth, sweep_test, sweep_opts, sweep_ks, seed, sweep_norm, sweep_out, threads);
        if (*synth) {
            const auto samples = synth_samples(parse_synth_spec(synth_spec, resolve_seed(seed)));
            write_dataset(synth_out, samples);
            std::cout << "wrote " << samples.size() << " samples to " << synth_out << '\n';
            return 0;
        }
        if (*inspect)
            return cmd_inspect(inspect_model, inspect_opts, inspect_out);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}
