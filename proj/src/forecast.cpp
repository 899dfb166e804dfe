#include "martkit/forecast.hpp"

#include <algorithm>
#include <memory>
#include <string>

#include "martkit/error.hpp"
#include "martkit/parallel.hpp"
#include "martkit/stats.hpp"

namespace martkit {

void RollingSpec::validate() const {
    require(train_window >= 2, ErrorKind::InvalidArgument, "train_window must be at least 2");
    require(test_start > train_window, ErrorKind::InvalidArgument,
            "test_start must exceed train_window");
    require(test_end >= test_start, ErrorKind::InvalidArgument, "test_end must be >= test_start");
    require(refit_every >= 1, ErrorKind::InvalidArgument, "refit_every must be positive");
}

MspeResult rolling_mspe(const MatrixSeries& series, const RollingSpec& spec,
                        const OneStepFitter& fitter, int threads) {
    spec.validate();
    series.validate();
    require(static_cast<std::size_t>(spec.test_end) <= series.length(), ErrorKind::InsufficientData,
            "test_end " + std::to_string(spec.test_end) + " exceeds the series length " +
                std::to_string(series.length()));

    const auto origins = static_cast<std::size_t>(spec.origins());
    const auto every = static_cast<std::size_t>(spec.refit_every);
    const std::size_t blocks = (origins + every - 1) / every;
    MspeResult out;
    out.per_step_errors.assign(origins, 0.0);
    parallel_for(blocks, threads, [&](std::size_t b) {
        const std::size_t first = b * every;
        const auto origin = static_cast<std::size_t>(spec.test_start) + first;
        const auto window = static_cast<std::size_t>(spec.train_window);
        const OneStepPredictor predict = fitter(series.slice(origin - window - 1, window));
        for (std::size_t k = first; k < std::min(first + every, origins); ++k) {
            const std::size_t t = static_cast<std::size_t>(spec.test_start) + k;
            out.per_step_errors[k] = (predict(series, t) - series.x[t - 1]).squaredNorm();
        }
    });
    out.fits = static_cast<int>(blocks);
    out.mspe = mean(out.per_step_errors);
    return out;
}

OneStepFitter baseline_fitter(const ModelKind& kind, const GridSpec& grid,
                              const AlsOptions& options) {
    return [kind, grid, options](const MatrixSeries& train) -> OneStepPredictor {
        auto fit = std::make_shared<BaselineFit>(fit_baseline(train, kind, grid, options));
        return [fit](const MatrixSeries& series, std::size_t t) {
            return predict_baseline(*fit, series.x[t - 2], series.z[t - 2], series.w[t - 2]);
        };
    };
}

MspeResult rolling_mspe(const MatrixSeries& series, const ModelKind& kind, const RollingSpec& spec,
                        const GridSpec& grid, const AlsOptions& options, int threads) {
    return rolling_mspe(series, spec, baseline_fitter(kind, grid, options), threads);
}

}  // namespace martkit
