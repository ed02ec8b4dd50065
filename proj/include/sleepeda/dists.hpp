#pragma once

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/fisher_f.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

namespace sleepeda {

inline double normal_pdf(double x) {
    return boost::math::pdf(boost::math::normal_distribution<double>(), x);
}

inline double normal_cdf(double x) {
    return boost::math::cdf(boost::math::normal_distribution<double>(), x);
}

inline double normal_quantile(double p) {
    return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

// Upper tail P(X > x) for X ~ chi-square(df).
inline double chi_squared_sf(double x, double df) {
    if (x <= 0.0) return 1.0;
    return boost::math::cdf(boost::math::complement(boost::math::chi_squared_distribution<double>(df), x));
}

// Two-sided p-value for a t statistic.
inline double t_two_sided_p(double t, double df) {
    const boost::math::students_t_distribution<double> dist(df);
    const double tail = boost::math::cdf(boost::math::complement(dist, std::abs(t)));
    return 2.0 * tail;
}

// Upper tail P(X > x) for X ~ F(df1, df2).
inline double f_sf(double x, double df1, double df2) {
    if (x <= 0.0) return 1.0;
    return boost::math::cdf(boost::math::complement(boost::math::fisher_f_distribution<double>(df1, df2), x));
}

}  // namespace sleepeda
