// radisynth — workspace-based synthetic NDT pipeline driver.
// Exit codes: 0 success, 1 validation error (bad flags/params), 2 runtime error.
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "radisynth/errors.hpp"
#include "radisynth/pipeline.hpp"
#include "radisynth/workspace.hpp"

using namespace radisynth;

namespace {

struct GlobalOpts {
    std::string workspace;
    std::uint64_t seed = 1;
    int threads = 1;
};

void log_entry(const std::string& what, const std::string& id) {
    std::cerr << "radisynth: " << what << " -> " << id << '\n';
}

FilterSpec parse_filter(const std::string& name, double cutoff) {
    FilterSpec f;
    f.cutoff = cutoff;
    if (name == "ramp")
        f.kind = FilterSpec::Kind::Ramp;
    else if (name == "ramp-hann")
        f.kind = FilterSpec::Kind::RampHann;
    else
        throw ValidationError("unknown filter '" + name + "' (ramp | ramp-hann)");
    return f;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"synthetic radiography / CT workspace pipeline"};
    app.require_subcommand(1);

    GlobalOpts g;
    if (const char* env = std::getenv("RADISYNTH_WORKSPACE")) g.workspace = env;
    app.add_option("-w,--workspace", g.workspace, "workspace root directory")
        ->envname("RADISYNTH_WORKSPACE");
    app.add_option("-s,--seed", g.seed, "master random seed");
    app.add_option("-t,--threads", g.threads, "worker threads")->check(CLI::PositiveNumber);
    app.set_config("-c,--config", "", "config file (TOML, keys mirror the flags)");

    // --- gen-plate
    GenPlateParams plate;
    auto* c_plate = app.add_subcommand("gen-plate", "generate a pore plate specimen");
    c_plate->add_option("--pores", plate.plate.pore_count, "pore count (0 = defect-free)");
    c_plate->add_flag("--poisson", plate.plate.poisson_count, "draw count from Poisson");
    c_plate->add_option("--plate-size", plate.plate.plate_size.x, "plate width/depth mm");
    c_plate->add_option("--thickness", plate.plate.plate_size.y, "plate thickness mm");
    c_plate->add_option("--radius", plate.plate.base_radius, "base pore radius mm");
    c_plate->add_option("--mu", plate.host.mu, "host attenuation 1/mm");
    c_plate->add_option("--segments", plate.segments, "sphere tessellation segments");

    // --- gen-fml
    GenFmlParams fml;
    auto* c_fml = app.add_subcommand("gen-fml", "generate a layered FML stack specimen");
    c_fml->add_option("--width", fml.width_mm, "lateral width mm");
    c_fml->add_option("--depth", fml.depth_mm, "lateral depth mm");

    // --- simulate
    SimulateParams sim;
    auto* c_sim = app.add_subcommand("simulate", "render X-ray projections of a spec");
    c_sim->add_option("--spec", sim.spec_id, "specimen entry id")->required();
    c_sim->add_option("--preset", sim.preset, "device preset: highq | midq | lowq");
    c_sim->add_option("--pixels", sim.geometry.nx, "detector pixels per side");
    c_sim->add_option("--pitch", sim.geometry.pitch_mm, "detector pitch mm");
    c_sim->add_option("--sod", sim.geometry.sod_mm, "source-object distance mm");
    c_sim->add_option("--sdd", sim.geometry.sdd_mm, "source-detector distance mm");
    c_sim->add_option("--projections", sim.projections, "projection count");
    c_sim->add_option("--start", sim.start_deg, "first angle deg");
    c_sim->add_option("--range", sim.range_deg, "angular range deg");
    c_sim->add_option("--noise", sim.noise_sigma, "relative Gaussian noise sigma");
    c_sim->add_option("--bits", sim.bits, "detector quantization bits");
    c_sim->add_option("--segments", sim.segments, "sphere tessellation segments");
    bool no_truth = false;
    c_sim->add_flag("--no-truth", no_truth, "skip ground-truth masks");

    // --- recon
    std::string recon_set, recon_filter = "ramp";
    double recon_cutoff = 1.0;
    int recon_out = 0;
    auto* c_recon = app.add_subcommand("recon", "FBP reconstruction of an image set");
    c_recon->add_option("--images", recon_set, "image-set entry id")->required();
    c_recon->add_option("--filter", recon_filter, "ramp | ramp-hann");
    c_recon->add_option("--cutoff", recon_cutoff, "filter cutoff (fraction of Nyquist)");
    c_recon->add_option("--out-n", recon_out, "output grid size (0 = detector width)");

    // --- extract-segments
    std::string seg_set;
    int seg_index = 0, seg_count = 1000, seg_size = 20;
    double seg_mix = 0.3;
    auto* c_seg = app.add_subcommand("extract-segments", "sample labeled training patches");
    c_seg->add_option("--images", seg_set, "image-set entry id")->required();
    c_seg->add_option("--index", seg_index, "projection index within the set");
    c_seg->add_option("--count", seg_count, "number of patches");
    c_seg->add_option("--mix", seg_mix, "pore fraction of the patches");
    c_seg->add_option("--size", seg_size, "patch side (divisible by 4)");

    // --- train-cnn
    TrainCnnParams tcnn;
    auto* c_tcnn = app.add_subcommand("train-cnn", "train the pixel classifier");
    c_tcnn->add_option("--segments", tcnn.segments_id, "segments entry id")->required();
    c_tcnn->add_option("--arch", tcnn.arch, "segment-filterA-filterB, e.g. 20-8-8");
    c_tcnn->add_option("--epochs", tcnn.epochs, "training epochs");
    c_tcnn->add_option("--lr", tcnn.learning_rate, "learning rate");
    c_tcnn->add_option("--batch", tcnn.batch_size, "mini-batch size");

    // --- classify
    std::string cls_model, cls_set;
    int cls_index = 0;
    auto* c_cls = app.add_subcommand("classify", "sliding-window pixel classification");
    c_cls->add_option("--model", cls_model, "model entry id")->required();
    c_cls->add_option("--images", cls_set, "image-set entry id")->required();
    c_cls->add_option("--index", cls_index, "projection index within the set");

    // --- cluster / fit / report / eval
    std::string fm_id, fit_clusters;
    double tau = 0.5, eps = 2.0;
    int min_pts = 5;
    auto* c_clu = app.add_subcommand("cluster", "threshold + DBSCAN on a feature map");
    c_clu->add_option("--map", fm_id, "feature-map entry id")->required();
    c_clu->add_option("--tau", tau, "score threshold");
    c_clu->add_option("--eps", eps, "DBSCAN eps (pixels)");
    c_clu->add_option("--min-pts", min_pts, "DBSCAN minPts");

    auto* c_fit = app.add_subcommand("fit", "ellipse fits for a stored clustering");
    c_fit->add_option("--clusters", fit_clusters, "cluster report entry id")->required();

    auto* c_rep = app.add_subcommand("report", "pore table: threshold, cluster, fit");
    c_rep->add_option("--map", fm_id, "feature-map entry id")->required();
    c_rep->add_option("--tau", tau, "score threshold");
    c_rep->add_option("--eps", eps, "DBSCAN eps (pixels)");
    c_rep->add_option("--min-pts", min_pts, "DBSCAN minPts");

    auto* c_eval = app.add_subcommand("eval", "pixel TP/FN/FP rates vs ground truth");
    c_eval->add_option("--map", fm_id, "feature-map entry id")->required();
    c_eval->add_option("--tau", tau, "score threshold");

    // --- zslice / train-ae / anomaly
    std::string z_vol;
    int z_window = 4, z_stride = 0;
    auto* c_z = app.add_subcommand("zslice", "extract averaged z-profiles from a volume");
    c_z->add_option("--volume", z_vol, "volume entry id")->required();
    c_z->add_option("--window", z_window, "averaging window (pixels)");
    c_z->add_option("--stride", z_stride, "grid stride (0 = window)");

    TrainAeParams tae;
    auto* c_tae = app.add_subcommand("train-ae", "train the z-profile autoencoder");
    c_tae->add_option("--profiles", tae.profiles_id, "z-profiles entry id")->required();
    c_tae->add_option("--epochs", tae.epochs, "training epochs");
    c_tae->add_option("--lr", tae.learning_rate, "learning rate");
    c_tae->add_option("--batch", tae.batch_size, "mini-batch size");
    c_tae->add_option("--percentile", tae.tau_percentile, "tau calibration percentile");

    std::string an_model, an_vol;
    double an_tau = -1;
    auto* c_an = app.add_subcommand("anomaly", "reconstruction-error anomaly map");
    c_an->add_option("--model", an_model, "autoencoder model entry id")->required();
    c_an->add_option("--volume", an_vol, "volume entry id")->required();
    c_an->add_option("--window", z_window, "averaging window (pixels)");
    c_an->add_option("--stride", z_stride, "grid stride (0 = window)");
    c_an->add_option("--tau", an_tau, "threshold override (default: calibrated)");

    // --- experiment-71
    Experiment71Params exp;
    auto* c_exp = app.add_subcommand("experiment-71", "end-to-end replication run");
    c_exp->add_option("--pores", exp.pores, "pores per plate");
    c_exp->add_option("--noise", exp.noise_sigma, "relative noise sigma");
    c_exp->add_option("--pixels", exp.image_px, "detector pixels per side");
    c_exp->add_option("--pitch", exp.pitch_mm, "detector pitch mm");
    c_exp->add_option("--arch", exp.arch, "classifier architecture");
    c_exp->add_option("--segments", exp.segment_count, "training patch count");
    c_exp->add_option("--mix", exp.pore_fraction, "pore fraction of the patches");
    c_exp->add_option("--epochs", exp.epochs, "training epochs");
    c_exp->add_option("--lr", exp.learning_rate, "learning rate");
    c_exp->add_option("--tau", exp.tau, "decision threshold on the pore score");
    bool no_ablation = false;
    c_exp->add_flag("--no-ablation", no_ablation, "skip FP probe and zero-noise rerun");

    // --- verify
    auto* c_ver = app.add_subcommand("verify", "check manifest integrity and provenance");

    CLI11_PARSE(app, argc, argv);

    try {
        if (g.workspace.empty())
            throw ValidationError(
                "no workspace: pass --workspace or set RADISYNTH_WORKSPACE");
        Workspace ws = Workspace::open(g.workspace);

        if (c_plate->parsed()) {
            if (c_plate->count("--plate-size"))
                plate.plate.plate_size.z = plate.plate.plate_size.x;
            plate.seed = g.seed;
            log_entry("spec", cmd_gen_plate(ws, plate));
        } else if (c_fml->parsed()) {
            log_entry("spec", cmd_gen_fml(ws, fml));
        } else if (c_sim->parsed()) {
            sim.geometry.ny = sim.geometry.nx;
            sim.write_truth = !no_truth;
            sim.seed = g.seed;
            log_entry("image-set", cmd_simulate(ws, sim, g.threads));
        } else if (c_recon->parsed()) {
            log_entry("volume", cmd_recon(ws, recon_set,
                                          parse_filter(recon_filter, recon_cutoff),
                                          recon_out, g.threads));
        } else if (c_seg->parsed()) {
            log_entry("segments", cmd_extract_segments(ws, seg_set, seg_index, seg_count,
                                                       seg_mix, seg_size, g.seed));
        } else if (c_tcnn->parsed()) {
            tcnn.seed = g.seed;
            log_entry("model", cmd_train_cnn(ws, tcnn));
        } else if (c_cls->parsed()) {
            log_entry("feature-map", cmd_classify(ws, cls_model, cls_set, cls_index,
                                                  g.threads));
        } else if (c_clu->parsed()) {
            log_entry("report", cmd_cluster(ws, fm_id, tau, eps, min_pts));
        } else if (c_fit->parsed()) {
            log_entry("report", cmd_fit(ws, fit_clusters));
        } else if (c_rep->parsed()) {
            log_entry("report", cmd_report(ws, fm_id, tau, eps, min_pts));
        } else if (c_eval->parsed()) {
            log_entry("report", cmd_eval(ws, fm_id, tau));
        } else if (c_z->parsed()) {
            log_entry("z-profiles", cmd_zslice(ws, z_vol, z_window, z_stride));
        } else if (c_tae->parsed()) {
            tae.seed = g.seed;
            log_entry("model", cmd_train_ae(ws, tae));
        } else if (c_an->parsed()) {
            std::optional<double> tau_opt;
            if (an_tau >= 0) tau_opt = an_tau;
            log_entry("anomaly-map", cmd_anomaly(ws, an_model, an_vol, z_window, z_stride,
                                                 tau_opt, g.threads));
        } else if (c_exp->parsed()) {
            exp.seed = g.seed;
            exp.ablation = !no_ablation;
            log_entry("run", cmd_experiment_71(ws, exp, g.threads));
        } else if (c_ver->parsed()) {
            auto problems = ws.verify();
            for (const auto& p : problems)
                std::cerr << "radisynth: verify: " << p.entry_id << ": " << p.message
                          << '\n';
            if (!problems.empty()) return 1;
            std::cerr << "radisynth: verify: " << ws.entries().size()
                      << " entries, all consistent\n";
        }
        return 0;
    } catch (const ValidationError& e) {
        std::cerr << "radisynth: error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "radisynth: error: " << e.what() << '\n';
        return 2;
    }
}
