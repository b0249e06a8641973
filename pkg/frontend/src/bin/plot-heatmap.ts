#!/usr/bin/env node
import { runHeatmap } from "../cli.js";

process.exit(runHeatmap(process.argv.slice(2)));
