import { StudioApi } from "./api.js";
import { wireStudio } from "./ui.js";

const root = document.getElementById("app");
if (!root) throw new Error("missing #app mount point");
wireStudio(root, new StudioApi(""));
