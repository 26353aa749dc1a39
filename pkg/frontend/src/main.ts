import { LabelerApp } from './app.js'

const app = new LabelerApp(document)
app.start()
