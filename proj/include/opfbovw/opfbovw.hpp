#pragma once

#include "opfbovw/core.hpp"
#include "opfbovw/dictionary.hpp"
#include "opfbovw/eval.hpp"
#include "opfbovw/experiment.hpp"
#include "opfbovw/io.hpp"
#include "opfbovw/knn_graph.hpp"
#include "opfbovw/metrics.hpp"
#include "opfbovw/opf_cluster.hpp"
#include "opfbovw/opf_supervised.hpp"
#include "opfbovw/parallel.hpp"
#include "opfbovw/report_io.hpp"
#include "opfbovw/split.hpp"
#include "opfbovw/wilcoxon.hpp"
